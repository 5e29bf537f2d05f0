"""Named geometries with their reaction laws and epsilon ladder."""

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Affine, AnnulusSector, FlatStrip, constant_profile, sawtooth_profile, sine_profile
from .nonlinearity import Nonlinearity


@dataclass(frozen=True)
class DomainScenario:
    """One experiment: chart, oscillation profile, nonlinearities and ladder.

    The fixed domain is the chart image of ``[-1, 1] x [-1, 0]``.  The
    oscillating boundary is the image of ``s = 0``; the two side walls and
    the bottom carry homogeneous Neumann conditions.
    """

    name: str
    chart: object
    profile: object
    nonlinearity: Nonlinearity = field(default_factory=lambda: Nonlinearity.from_names("one", "linear"))
    eps0: float = 0.2
    levels: int = 7
    h0: float = 0.05

    def __post_init__(self):
        if not self.eps0 > 0 or self.levels < 1 or not self.h0 > 0:
            raise ValueError("eps0, levels and h0 must be positive")

    @property
    def ladder(self):
        return self.eps0 * 0.5 ** np.arange(self.levels)

    def h_for(self, eps):
        """Mesh size tied to epsilon: ``min(h0, eps / 8)``."""
        return min(self.h0, eps / 8.0) if eps > 0 else self.h0

    def with_(self, **changes):
        return replace(self, **changes)


def _flat(name, profile):
    return DomainScenario(name, FlatStrip(), profile)


def _build(name):
    if name == "flat_constant":
        return _flat(name, constant_profile(2.0, period=2.0))
    if name == "flat_sawtooth":
        return _flat(name, sawtooth_profile())
    if name == "flat_sine":
        return _flat(name, sine_profile())
    if name == "annulus_sine":
        return DomainScenario(name, AnnulusSector.constant(2.0), sine_profile())
    if name == "annulus_variable_r":
        return DomainScenario(name, AnnulusSector.linear(2.0, 0.3), sine_profile())
    raise KeyError(name)


SCENARIOS = ("flat_constant", "flat_sawtooth", "flat_sine", "annulus_sine", "annulus_variable_r")


def get_scenario(name, **overrides):
    """Build a registered scenario, optionally overriding its fields."""
    try:
        sc = _build(name)
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {list(SCENARIOS)}") from None
    return sc.with_(**overrides) if overrides else sc


def make_profile(kind, amplitude=1.0, offset=None, period=2.0, alpha=1.0, phi0=1.0, phi1=0.0):
    """Profile from configuration-style parameters."""
    mod = Affine(phi0, phi1)
    if kind == "constant":
        return constant_profile(2.0 if offset is None else offset, period, alpha, mod)
    if kind == "sawtooth":
        return sawtooth_profile(amplitude, 1.0 if offset is None else offset, period, alpha, mod)
    if kind == "sine":
        return sine_profile(amplitude, 2.0 if offset is None else offset, period, alpha, mod)
    raise ValueError(f"unknown profile kind {kind!r}")
