"""Line-oriented run configuration: ``key = value`` pairs under ``[section]`` headers.

Keys before the first header belong to the top-level section.  Comments
start with ``#`` or ``;``.  Every key has a documented default; unknown keys,
duplicate keys and malformed values are rejected with the offending line.
"""

import hashlib
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .geometry import Affine
from .nonlinearity import LAWS, Nonlinearity
from .scenarios import SCENARIOS, get_scenario, make_profile


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _alpha(v):
    return 0 < v <= 1


def _theta(v):
    return 0 < v <= 1


@dataclass(frozen=True)
class Key:
    type: type
    default: object
    check: object = None
    choices: tuple = ()
    doc: str = ""


_LAW_NAMES = tuple(LAWS)

SCHEMA = {
    "": {
        "scenario": Key(str, None, choices=SCENARIOS, doc="registered scenario name (required)"),
        "seed": Key(int, 0, _non_negative, doc="seed for randomized initial data"),
        "out": Key(str, "results", doc="output directory"),
    },
    "profile": {
        "kind": Key(str, "default", choices=("default", "constant", "sawtooth", "sine"),
                    doc="'default' keeps the scenario's own profile"),
        "amplitude": Key(float, 1.0, _positive, doc="sawtooth slope or sine amplitude"),
        "offset": Key(float, 0.0, _non_negative, doc="profile offset; 0 selects the kind's default"),
        "period": Key(float, 2.0, _positive, doc="cell length l"),
        "alpha": Key(float, 1.0, _alpha, doc="oscillation exponent in (0, 1]"),
        "phi0": Key(float, 1.0, _positive, doc="amplitude modulation phi(x) = phi0 + phi1 x"),
        "phi1": Key(float, 0.0, doc="amplitude modulation slope"),
    },
    "nonlinearity": {
        "f": Key(str, "one", choices=_LAW_NAMES, doc="concentrated reaction law"),
        "g": Key(str, "linear", choices=_LAW_NAMES, doc="boundary flux law"),
        "R": Key(float, 10.0, _positive, doc="cut-off radius"),
    },
    "ladder": {
        "eps0": Key(float, 0.2, _positive, doc="largest epsilon"),
        "levels": Key(int, 7, _positive, doc="number of halvings plus one"),
        "h0": Key(float, 0.05, _positive, doc="mesh size cap; h = min(h0, eps / 8)"),
    },
    "solver": {
        "tol": Key(float, 1e-10, _positive, doc="nonlinear residual tolerance"),
        "theta": Key(float, 0.5, _theta, doc="Picard damping"),
        "max_picard": Key(int, 200, _positive),
        "max_newton": Key(int, 50, _positive),
        "perturbation": Key(float, 0.0, _non_negative, doc="size of seeded random noise added to initial data"),
    },
    "tolerances": {
        "coefficients": Key(float, 1e-2, _positive, doc="relative, estimator against closed form"),
        "concentrated": Key(float, 1e-2, _positive, doc="relative, extrapolated concentrated integral"),
        "boundary_measure": Key(float, 2e-2, _positive, doc="relative, boundary length against gamma measure"),
        "trace_ratio": Key(float, 2.0, _positive, doc="max/min bound on trace constants"),
        "main_floor_factor": Key(float, 3.0, _positive, doc="multiple of the discretization floor"),
        "eigen_floor_factor": Key(float, 5.0, _positive, doc="multiple of the discretization floor"),
        "eigen_k": Key(int, 5, _positive, doc="number of eigenvalues"),
        "n_hats": Key(int, 32, _positive, doc="test functions of the weak-limit estimator"),
    },
}


@dataclass(frozen=True)
class Configuration:
    """Validated run configuration; ``values[section][key]`` holds every key."""

    values: dict
    defaulted: tuple = field(default=(), compare=False)

    def __getitem__(self, path):
        section, _, key = path.rpartition(".")
        return self.values[section][key]

    def scenario(self):
        """Build the :class:`DomainScenario` described by this configuration."""
        v = self.values
        p, nl, lad = v["profile"], v["nonlinearity"], v["ladder"]
        sc = get_scenario(v[""]["scenario"])
        if p["kind"] != "default":
            profile = make_profile(p["kind"], p["amplitude"], p["offset"] or None, p["period"],
                                   p["alpha"], p["phi0"], p["phi1"])
        elif p["alpha"] != 1.0 or p["phi0"] != 1.0 or p["phi1"] != 0.0:
            profile = replace(sc.profile, alpha=p["alpha"], modulation=Affine(p["phi0"], p["phi1"]),
                              dmodulation=None)
        else:
            profile = sc.profile
        return sc.with_(profile=profile, nonlinearity=Nonlinearity.from_names(nl["f"], nl["g"], nl["R"]),
                        eps0=lad["eps0"], levels=lad["levels"], h0=lad["h0"])

    def serialize(self):
        """Canonical text: every section and key in schema order, floats by ``repr``."""
        lines = []
        for section, keys in SCHEMA.items():
            if section:
                lines.append("")
                lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_format(self.values[section][key])}")
        return "\n".join(lines) + "\n"

    def digest(self):
        """Hash of the canonical text without the output directory."""
        text = "\n".join(ln for ln in self.serialize().splitlines() if not ln.startswith("out = "))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _format(v):
    return repr(v) if isinstance(v, float) else str(v)


def _convert(rule, raw, where):
    try:
        if rule.type is int:
            value = int(raw)
        elif rule.type is float:
            value = float(raw)
        else:
            value = raw
    except ValueError:
        raise ConfigError(f"{where}: malformed {rule.type.__name__} {raw!r}", where.line) from None
    if rule.choices and value not in rule.choices:
        raise ConfigError(f"{where}: {raw!r} not one of {', '.join(rule.choices)}", where.line)
    if rule.check is not None and not rule.check(value):
        raise ConfigError(f"{where}: value {raw!r} out of range", where.line)
    return value


@dataclass(frozen=True)
class _Where:
    section: str
    key: str
    line: int

    def __str__(self):
        return f"{self.section + '.' if self.section else ''}{self.key}"


def parse_config(text):
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, duplicates (naming both
        lines), malformed or out-of-range values, or a missing scenario.
    """
    section = ""
    seen = {}
    values = {s: {} for s in SCHEMA}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if not section or section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in SCHEMA[section]:
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"unknown key {key!r} at {where}", lineno)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[section, key]})", lineno)
        seen[section, key] = lineno
        values[section][key] = _convert(SCHEMA[section][key], value, _Where(section, key, lineno))
    if "scenario" not in values[""]:
        raise ConfigError("missing required key 'scenario'", len(text.splitlines()) + 1)
    defaulted = []
    for section, keys in SCHEMA.items():
        for key, rule in keys.items():
            if key not in values[section]:
                values[section][key] = rule.default
                defaulted.append(f"{section + '.' if section else ''}{key}")
    return Configuration(values, tuple(defaulted))


def default_config(scenario):
    return parse_config(f"scenario = {scenario}\n")
