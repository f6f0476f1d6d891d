"""Run configuration: parsing, range checks, defaults and canonical echo."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .protocol import MAX_MEASUREMENT_DIM
from .wormhole import AUX_MODES, MAX_PAIRS

COMMANDS = (
    "verify-theorem1",
    "pareto",
    "theorem2",
    "ergotropy-scaling",
    "wormhole-curve",
    "locc-equiv",
    "tradeoff-point",
)

PARETO_FAMILIES = ("interpolated", "haar", "bell", "product", "kraus")
THEOREM2_FAMILIES = ("haar", "bell", "product")

_COMMON = {"seed": 0, "tolerance": 1e-8, "out": None}

DEFAULTS: dict[str, dict[str, Any]] = {
    "verify-theorem1": {"dim": 2, "beta": 1.0, "samples": 1000, "hamiltonian": None, "proof_steps": True},
    "pareto": {
        "dim": 2,
        "beta": 1.0,
        "family": ["interpolated"],
        "samples": 200,
        "hamiltonian": None,
        "units": "nats",
    },
    "theorem2": {
        "dim": 2,
        "n_copies": 3,
        "family": "haar",
        "samples": 20,
        "resource": {"schmidt": [0.2, 0.8]},
        "beta": 1.0,
        "hamiltonian": None,
    },
    "ergotropy-scaling": {"dim": 2, "n_copies": 6, "samples": 1, "state": None, "hamiltonian": None},
    "wormhole-curve": {"delta": 1.0, "beta": 2 * math.pi, "g": 1.0, "t": "0:5:0.01"},
    "locc-equiv": {
        "K": 1,
        "g": 0.3,
        "state": "random",
        "beta": 1.0,
        "aux_mode": "per_pair",
        "order": None,
        "n_sys": 6,
    },
    "tradeoff-point": {"protocol": None, "units": "nats"},
}


class ConfigError(ValueError):
    """All schema violations found in one configuration."""

    def __init__(self, errors: list[dict]):
        self.errors = errors
        super().__init__("; ".join(f"{e['field']}: {e['constraint']}" for e in errors))

    def to_json(self) -> str:
        return json.dumps({"error": "invalid configuration", "violations": self.errors}, sort_keys=True)


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def to_dict(self) -> dict:
        return {"command": self.command, **self.values}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def parse_range(spec: str) -> tuple[float, float, float]:
    """``"start:stop:step"`` with stop inclusive up to round-off."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise ValueError("time range must look like start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ValueError("time range entries must be finite")
    if step <= 0 or stop < start:
        raise ValueError("time range needs step > 0 and stop >= start")
    if start < 0:
        raise ValueError("delay times must be nonnegative")
    if (stop - start) / step > 1e6:
        raise ValueError("time range has more than 10^6 points")
    return start, stop, step


def _load_json_ref(value, what: str, errors: list, key: str):
    """Inline object or a path to a JSON file; returns the object."""
    if value is None or isinstance(value, dict):
        return value
    if isinstance(value, str):
        try:
            return json.loads(Path(value).read_text())
        except OSError as exc:
            errors.append({"field": key, "constraint": f"{what} file unreadable: {exc.strerror}", "value": value})
        except json.JSONDecodeError as exc:
            errors.append({"field": key, "constraint": f"{what} file is not JSON: {exc.msg}", "value": value})
        return None
    errors.append({"field": key, "constraint": f"{what} must be an object or a file path", "value": value})
    return None


def _check_hamiltonian(obj, dim, errors):
    if obj is None:
        return
    if "eigenvalues" in obj:
        ev = obj["eigenvalues"]
        if not isinstance(ev, list) or not ev or not all(_is_real(x) for x in ev):
            errors.append({"field": "hamiltonian", "constraint": "eigenvalues must be a nonempty list of reals"})
            return
        n = len(ev)
    elif {"rows", "cols", "re", "im"} <= set(obj):
        n = obj["rows"]
        if obj["rows"] != obj["cols"]:
            errors.append({"field": "hamiltonian", "constraint": "matrix must be square"})
            return
    else:
        errors.append({"field": "hamiltonian", "constraint": "needs 'eigenvalues' or a rows/cols/re/im matrix"})
        return
    if dim is not None and n != dim:
        errors.append({"field": "hamiltonian", "constraint": f"dimension {n} does not match dim = {dim}"})


def validate_config(raw, command: str | None = None) -> RunConfig:
    """Parse JSON text or a dict into a range-checked RunConfig with defaults applied.

    Every violation is collected before raising :class:`ConfigError`.
    """
    errors: list[dict] = []
    if isinstance(raw, (str, bytes)):
        text = raw.decode() if isinstance(raw, bytes) else raw
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError([{"field": "<root>", "constraint": f"not valid JSON: {exc.msg}"}]) from None
    else:
        data = dict(raw or {})
    if not isinstance(data, dict):
        raise ConfigError([{"field": "<root>", "constraint": "configuration must be a JSON object"}])

    cmd = data.pop("command", None)
    if command is not None and cmd is not None and cmd != command:
        errors.append({"field": "command", "constraint": f"config says {cmd!r} but {command!r} was invoked"})
    cmd = command or cmd
    if cmd not in COMMANDS:
        raise ConfigError(errors + [{"field": "command", "constraint": f"must be one of {list(COMMANDS)}", "value": cmd}])

    allowed = {**_COMMON, **DEFAULTS[cmd]}
    for key in sorted(set(data) - set(allowed)):
        errors.append({"field": key, "constraint": f"unknown field for {cmd}"})
    values = {k: data.get(k, v) for k, v in allowed.items()}
    # mutable defaults must not be shared between configs
    values = json.loads(json.dumps(values))

    def need(key, ok, constraint):
        if key in values and not ok(values[key]):
            errors.append({"field": key, "constraint": constraint, "value": values[key]})
            return False
        return True

    need("seed", lambda x: _is_int(x) and 0 <= x < 2**63, "integer in [0, 2^63)")
    need("tolerance", lambda x: _is_real(x) and x > 0, "positive real")
    need("out", lambda x: x is None or (isinstance(x, str) and x), "path string or null")
    need("samples", lambda x: _is_int(x) and x >= 1, "integer >= 1")
    dim_ok = need("dim", lambda x: _is_int(x) and 2 <= x <= 16, "integer in [2, 16]")
    if cmd == "verify-theorem1":
        need("beta", lambda x: _is_real(x) and x > 0, "finite real > 0")
        need("proof_steps", lambda x: isinstance(x, bool), "boolean")
    elif "beta" in values:
        need("beta", lambda x: _is_real(x) and x >= 0, "finite real >= 0")
    if "n_copies" in values and dim_ok:
        if need("n_copies", lambda x: _is_int(x) and x >= 1, "integer >= 1"):
            d, n = values["dim"], values["n_copies"]
            limit = d ** (2 * n) if cmd == "theorem2" else d**n
            if limit > MAX_MEASUREMENT_DIM:
                errors.append(
                    {"field": "n_copies", "constraint": f"dimension {limit} exceeds {MAX_MEASUREMENT_DIM}", "value": n}
                )
    if "units" in values:
        need("units", lambda x: x in ("nats", "bits"), "one of 'nats', 'bits'")

    if cmd == "pareto":
        fam = values["family"]
        if isinstance(fam, str):
            fam = values["family"] = [fam]
        need(
            "family",
            lambda f: isinstance(f, list) and f and all(x in PARETO_FAMILIES for x in f),
            f"family name or list drawn from {list(PARETO_FAMILIES)}",
        )
    if cmd == "theorem2":
        need("family", lambda f: f in THEOREM2_FAMILIES, f"one of {list(THEOREM2_FAMILIES)}")
        res = values["resource"]
        ok = res == "tfd" or (
            isinstance(res, dict)
            and set(res) == {"schmidt"}
            and isinstance(res["schmidt"], list)
            and all(_is_real(x) and x >= 0 for x in res["schmidt"])
            and sum(res["schmidt"]) > 0
        )
        if not ok:
            errors.append(
                {"field": "resource", "constraint": "'tfd' or {'schmidt': [nonnegative weights]}", "value": res}
            )
        elif isinstance(res, dict) and dim_ok and len(res["schmidt"]) != values["dim"]:
            errors.append({"field": "resource", "constraint": f"needs {values['dim']} Schmidt weights"})
    if cmd == "ergotropy-scaling":
        st = values["state"]
        if st is not None:
            ok = isinstance(st, dict) and set(st) == {"populations"} and isinstance(st["populations"], list)
            ok = ok and all(_is_real(x) and x >= 0 for x in st["populations"]) and sum(st["populations"]) > 0
            if not ok:
                errors.append({"field": "state", "constraint": "null or {'populations': [nonnegative reals]}"})
            elif dim_ok and len(st["populations"]) != values["dim"]:
                errors.append({"field": "state", "constraint": f"needs {values['dim']} populations"})
    if "hamiltonian" in values:
        values["hamiltonian"] = _load_json_ref(values["hamiltonian"], "Hamiltonian", errors, "hamiltonian")
        if values["hamiltonian"] is not None and not isinstance(values["hamiltonian"], dict):
            errors.append({"field": "hamiltonian", "constraint": "must be a JSON object"})
        elif dim_ok:
            _check_hamiltonian(values["hamiltonian"], values.get("dim"), errors)

    if cmd == "wormhole-curve":
        need("delta", lambda x: _is_real(x) and x > 0, "finite real > 0")
        need("beta", lambda x: _is_real(x) and x > 0, "finite real > 0")
        need("g", _is_real, "finite real")
        try:
            parse_range(values["t"])
        except (TypeError, ValueError) as exc:
            errors.append({"field": "t", "constraint": str(exc), "value": values["t"]})
    if cmd == "locc-equiv":
        k_ok = need("K", lambda x: _is_int(x) and 1 <= x <= MAX_PAIRS, f"integer in [1, {MAX_PAIRS}]")
        need("g", _is_real, "finite real")
        need("state", lambda x: x in ("random", "tfd"), "one of 'random', 'tfd'")
        need("aux_mode", lambda x: x in AUX_MODES, f"one of {list(AUX_MODES)}")
        need("n_sys", lambda x: _is_int(x) and x in (4, 6), "4 or 6")
        if k_ok and values["order"] is not None:
            need(
                "order",
                lambda o: isinstance(o, list) and sorted(o) == list(range(1, values["K"] + 1)),
                "null or a permutation of 1..K",
            )
    if cmd == "tradeoff-point":
        values["protocol"] = _load_json_ref(values["protocol"], "protocol", errors, "protocol")
        if values["protocol"] is not None:
            _check_protocol(values["protocol"], errors)

    if errors:
        raise ConfigError(errors)
    return RunConfig(cmd, values)


PROTOCOL_KEYS = {"resource", "beta", "hamiltonian", "measurement", "decoder"}


def _check_protocol(p, errors):
    if not isinstance(p, dict):
        errors.append({"field": "protocol", "constraint": "must be a JSON object"})
        return
    for key in sorted(set(p) - PROTOCOL_KEYS):
        errors.append({"field": f"protocol.{key}", "constraint": "unknown field"})
    res = p.get("resource", {"type": "tfd"})
    if not isinstance(res, dict) or res.get("type") not in ("tfd", "explicit"):
        errors.append({"field": "protocol.resource", "constraint": "object with type 'tfd' or 'explicit'"})
    elif res["type"] == "explicit":
        if not (isinstance(res.get("re"), list) and isinstance(res.get("im", []), list)):
            errors.append({"field": "protocol.resource", "constraint": "explicit resource needs 're' (and 'im') lists"})
    beta = p.get("beta", 1.0)
    if not (_is_real(beta) and beta > 0):
        errors.append({"field": "protocol.beta", "constraint": "finite real > 0", "value": beta})
    meas = p.get("measurement", {"family": "bell"})
    if not isinstance(meas, dict) or meas.get("family") not in ("bell", "product", "interpolated", "haar"):
        errors.append({"field": "protocol.measurement", "constraint": "family in bell, product, interpolated, haar"})
    elif meas["family"] == "interpolated":
        th = meas.get("theta")
        if not (_is_real(th) and 0 <= th <= math.pi / 2):
            errors.append({"field": "protocol.measurement.theta", "constraint": "real in [0, pi/2]", "value": th})
    if p.get("decoder", "ergotropy_optimal") not in ("ergotropy_optimal", "none"):
        errors.append({"field": "protocol.decoder", "constraint": "'ergotropy_optimal' or 'none'"})
    h = p.get("hamiltonian")
    if h is not None:
        if not isinstance(h, dict):
            errors.append({"field": "protocol.hamiltonian", "constraint": "must be a JSON object"})
        else:
            sub: list = []
            _check_hamiltonian(h, None, sub)
            errors += [{**e, "field": "protocol.hamiltonian"} for e in sub]
