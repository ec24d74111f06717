"""JSON model files: schema validation and construction of the analytic objects they describe."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from jsonschema import Draft202012Validator

from .birth_death import BirthDeathSpec
from .distributions import service_from_dict
from .errors import QueueKitError
from .pgf import PGFSeries
from .polling import DiscretePollingSpec, PollingSpec
from .sim.core import SimConfig


class ModelFileError(QueueKitError):
    """Unreadable file or schema violations; ``violations`` lists (path, message) pairs."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{p}: {m}" for p, m in violations))


def load_schema() -> dict:
    return json.loads(resources.files("queuekit").joinpath("model_schema.json").read_text())


def format_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "$"


@dataclass(frozen=True)
class ModelFile:
    version: str
    models: tuple                     # entry dicts, each with a unique "name"
    sim: SimConfig

    def by_name(self) -> list[dict]:
        return sorted(self.models, key=lambda e: e["name"])


def validate_document(doc) -> list[tuple[str, str]]:
    validator = Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (format_path(e.absolute_path), e.message))
    found = [(format_path(e.absolute_path), e.message) for e in errors]
    if found or not isinstance(doc, dict):
        return found
    seen = {}
    for i, entry in enumerate(doc["models"]):
        name = entry.get("name", f"{entry['kind']}-{i}")
        if name in seen:
            found.append((f"models[{i}].name", f"duplicate model name {name!r} (also models[{seen[name]}])"))
        seen[name] = i
    return found


def parse_document(doc, seed: int | None = None, horizon: int | None = None) -> ModelFile:
    problems = validate_document(doc)
    if problems:
        raise ModelFileError(problems)
    models = []
    for i, entry in enumerate(doc["models"]):
        e = dict(entry)
        e.setdefault("name", f"{e['kind']}-{i}")
        models.append(e)
    sim = dict(doc.get("sim", {}))
    if seed is not None:
        sim["seed"] = seed
    if horizon is not None:
        sim["horizon"] = horizon
    try:
        cfg = SimConfig(**sim)
    except QueueKitError as exc:
        raise ModelFileError([("sim", str(exc))]) from exc
    return ModelFile(str(doc.get("version", "1")), tuple(models), cfg)


def parse_model_file(path, seed: int | None = None, horizon: int | None = None) -> ModelFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFileError([("$", f"cannot read {path}: {exc.strerror}")]) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError([("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")]) from exc
    return parse_document(doc, seed, horizon)


# entry -> domain objects

def pgf_from_dict(d: dict) -> PGFSeries:
    fam = d["family"]
    if fam == "poisson":
        return PGFSeries.poisson(d["mu"])
    if fam == "geometric":
        return PGFSeries.geometric(d["p"])
    if fam == "bernoulli-quadratic":
        return PGFSeries.bernoulli_quadratic(d["a0"], d["a2"])
    if fam == "degenerate":
        return PGFSeries.degenerate(d["k"])
    if fam == "compound":
        return PGFSeries.compound(pgf_from_dict(d["outer"]), pgf_from_dict(d["inner"]))
    return PGFSeries.table(d["coeffs"], d.get("tail_mass", 0.0))


def birth_death_from_entry(e: dict) -> BirthDeathSpec:
    return BirthDeathSpec(e["family"], e.get("beta", 0.0), e.get("delta", 0.0), e.get("m", 1),
                          tuple(e.get("births", ())), tuple(e.get("deaths", ())))


def polling_from_entry(e: dict) -> PollingSpec:
    return PollingSpec(e["lam"], e["b1"], e["b2"], e["s1"], e["s2"], e.get("delta2"))


def discrete_polling_from_entry(e: dict) -> DiscretePollingSpec:
    return DiscretePollingSpec(e["mu"], e["r"])


def service_from_entry(e: dict):
    """Service law for a queue entry: explicit descriptor, else exponential(delta), else None."""
    if "service" in e:
        return service_from_dict(e["service"])
    if "delta" in e:
        return service_from_dict({"dist": "exponential", "rate": e["delta"]})
    return None
