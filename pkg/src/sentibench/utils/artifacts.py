import datetime
import hashlib
import json
import pathlib
from typing import Iterable, Mapping


def new_run_dir(name: str, root: str | pathlib.Path = "artifacts") -> pathlib.Path:
    ts = datetime.datetime.now().strftime('%Y%m%d_%H%M%S')
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in name) or "run"
    p = pathlib.Path(root) / safe / ts
    p.mkdir(parents=True, exist_ok=True)
    return p


def sha256_file(path: str | pathlib.Path) -> str:
    h = hashlib.sha256()
    with pathlib.Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_inputs(paths: Iterable[pathlib.Path]) -> dict[str, str]:
    return {str(p): sha256_file(p) for p in paths}


def write_json(path: pathlib.Path, payload: Mapping) -> pathlib.Path:
    # sorted keys and a trailing newline keep reruns byte-identical
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def list_outputs(outdir: pathlib.Path, exclude: Iterable[str] = ("manifest.json",)) -> list[str]:
    skip = set(exclude)
    return sorted(p.relative_to(outdir).as_posix() for p in outdir.rglob("*") if p.is_file() and p.name not in skip)
