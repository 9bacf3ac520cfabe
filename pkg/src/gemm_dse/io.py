"""File formats: workload lists, device profiles, run configs, provenance records."""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import platform
import re
import subprocess
import sys
from dataclasses import dataclass
from importlib import resources as _res
from pathlib import Path
from typing import Optional

import numpy as np

from .analytical import SampleSpec
from .design_space import ConfigError, DeviceModel, GemmWorkload

WORKLOAD_COLUMNS = ("label", "M", "N", "K")
OPTIONAL_WORKLOAD_COLUMNS = ("element_bytes",)
_DIMS_RE = re.compile(r"^(\d+)[xX](\d+)[xX](\d+)$")


class InputError(ValueError):
    """Malformed or missing user input; the CLI maps it to exit code 2."""


def bundled_workloads_path() -> Path:
    return Path(str(_res.files("gemm_dse") / "data" / "workloads.csv"))


def parse_workloads(text: str, source: str = "<workloads>") -> list[GemmWorkload]:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{source}: empty workload file (expected header {','.join(WORKLOAD_COLUMNS)})")
    header = [h.strip() for h in rows[0]]
    allowed = WORKLOAD_COLUMNS + OPTIONAL_WORKLOAD_COLUMNS
    for h in header:
        if h not in allowed:
            raise InputError(f"{source}: unexpected column {h!r} (expected {','.join(WORKLOAD_COLUMNS)})")
    for h in WORKLOAD_COLUMNS:
        if h not in header:
            raise InputError(f"{source}: missing column {h!r}")
    if len(set(header)) != len(header):
        raise InputError(f"{source}: duplicate column in header")
    out, seen = [], set()
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise InputError(f"{source}:{lineno}: expected {len(header)} fields, got {len(r)}")
        rec = dict(zip(header, (c.strip() for c in r)))
        try:
            dims = {d: int(rec[d]) for d in ("M", "N", "K")}
            eb = int(rec.get("element_bytes", 4))
            w = GemmWorkload(**dims, element_bytes=eb, label=rec["label"] or None)
        except (ValueError, TypeError) as exc:
            raise InputError(f"{source}:{lineno}: {exc}") from None
        if w.name in seen:
            raise InputError(f"{source}:{lineno}: duplicate label {w.name!r}")
        seen.add(w.name)
        out.append(w)
    return out


def load_workloads(path=None) -> list[GemmWorkload]:
    p = bundled_workloads_path() if path is None else Path(path)
    if not p.is_file():
        raise InputError(f"workload file not found: {p}")
    return parse_workloads(p.read_text(), str(p))


def resolve_workload(spec: str, workloads: Optional[list[GemmWorkload]] = None) -> GemmWorkload:
    """A label from ``workloads`` (bundled list by default) or an ``MxNxK`` literal."""
    pool = load_workloads() if workloads is None else workloads
    for w in pool:
        if w.name == spec:
            return w
    m = _DIMS_RE.match(spec.strip())
    if m:
        try:
            return GemmWorkload(*map(int, m.groups()))
        except ValueError as exc:
            raise InputError(str(exc)) from None
    known = ", ".join(w.name for w in pool)
    raise InputError(f"unknown workload {spec!r}; use MxNxK or one of: {known}")


def load_device(path=None) -> DeviceModel:
    if path is None:
        return DeviceModel()
    p = Path(path)
    if not p.is_file():
        raise InputError(f"device file not found: {p}")
    try:
        return DeviceModel.from_dict(json.loads(p.read_text()))
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: not JSON: {exc}") from None
    except (ConfigError, TypeError, ValueError) as exc:
        raise InputError(f"{p}: {exc}") from None


@dataclass(frozen=True)
class Seeds:
    dataset: int = 0
    train: int = 0
    split: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on. Seeds are always explicit."""

    device: Optional[str] = None
    workloads: Optional[str] = None
    sample_spec: SampleSpec = SampleSpec()
    hp_space: Optional[dict] = None
    seeds: Seeds = Seeds()
    out_dir: str = "out"

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(doc, dict):
            raise InputError("run config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(doc) - known
        if extra:
            raise InputError(f"unknown run config fields: {sorted(extra)}")
        kw = dict(doc)
        try:
            if "sample_spec" in kw:
                kw["sample_spec"] = SampleSpec(**kw["sample_spec"])
            if "seeds" in kw:
                kw["seeds"] = Seeds(**kw["seeds"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"run config: {exc}") from None
        for key in ("device", "workloads"):
            if kw.get(key) is not None and base_dir is not None:
                kw[key] = str((base_dir / kw[key]).resolve())
        cfg = cls(**kw)
        cfg.check_paths()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise InputError(f"run config not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}: not JSON: {exc}") from None
        return cls.from_dict(doc, p.parent)

    def check_paths(self) -> None:
        for key in ("device", "workloads"):
            v = getattr(self, key)
            if v is not None and not Path(v).is_file():
                raise InputError(f"run config {key} path does not exist: {v}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- artifacts -----------------------------------------------------------------


def dumps_json(doc) -> str:
    """Canonical JSON so reruns are byte-identical."""
    return json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_text(path, text: str) -> str:
    """Write ``text`` and return its sha256."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def file_digest(path) -> Optional[str]:
    p = Path(path)
    if not p.is_file():
        return None
    return hashlib.sha256(p.read_bytes()).hexdigest()


def git_describe(path=None) -> Optional[str]:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=str(path or Path(__file__).parent), capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


def write_provenance(path, command: str, inputs: dict, params: dict, outputs: dict) -> None:
    """Side-car record; the only artifact allowed to differ between reruns."""
    from . import __version__

    doc = {
        "command": command,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "argv": sys.argv,
        "package_version": __version__,
        "git_describe": git_describe(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "inputs": {k: {"path": str(v), "sha256": file_digest(v)} for k, v in inputs.items() if v is not None},
        "params": params,
        "outputs": outputs,
    }
    write_text(path, dumps_json(doc))
