"""JSON and CSV serialization for policies, reports and run manifests.

Floats are written with Python's shortest round-trip representation, so
every value parses back to the identical double.

Policy file schema (``format: "minegames-policy"``, ``version: 1``)::

    {"format": "minegames-policy", "version": 1,
     "model": "immediate" | "strategic", "d": int, "a_max": int | null,
     "default_landing_s": int,
     "entries": [{"a": int, "b": int, "action": "mine" | "capitulate" | "release",
                  "s": int (capitulate only)}, ...]}

A non-winning state without an entry gets the default fill: release when
``a >= b + 1`` (strategic), mine when ``b == 0``, otherwise capitulate to
``default_landing_s`` if that is below ``b`` and to 0 if not.
"""

from __future__ import annotations

import csv
import io as _io
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    Action,
    ActionKind,
    GameParams,
    GameState,
    Model,
    Policy,
    StateClass,
    classify,
    is_legal,
    iter_states,
    validate_state,
)
from .errors import IllegalActionError

POLICY_FORMAT = "minegames-policy"
REPORT_FORMAT = "minegames-report"
SCHEMA_VERSION = 1

_ACTION_NAMES = {ActionKind.MINE: "mine", ActionKind.CAPITULATE: "capitulate", ActionKind.RELEASE: "release"}
_ACTION_KINDS = {v: k for k, v in _ACTION_NAMES.items()}


def params_dict(params: GameParams) -> dict:
    return {"model": params.model.value, "p": params.p, "d": params.d, "a_max": params.a_max}


# policies

def _default_action(st: GameState, params: GameParams, default_s: int) -> Action:
    if params.model is Model.STRATEGIC and st.a >= st.b + 1:
        return Action(ActionKind.RELEASE)
    if st.b == 0:
        return Action(ActionKind.MINE)
    return Action.capitulate(default_s if default_s < st.b else 0)


def _most_common_landing(policy: Policy) -> int:
    vals = policy.landing[policy.landing >= 0]
    if vals.size == 0:
        return 0
    counts = np.bincount(vals)
    return int(np.argmax(counts))


def policy_to_dict(policy: Policy, default_landing_s: int | None = None) -> dict:
    """Every decision state is listed, so the fill rule never applies on reload."""
    entries = []
    for st in iter_states(policy.params):
        act = policy.action(st)
        if act is None:
            continue
        e = {"a": st.a, "b": st.b, "action": _ACTION_NAMES[act.kind]}
        if act.kind == ActionKind.CAPITULATE:
            e["s"] = act.s
        entries.append(e)
    return {
        "format": POLICY_FORMAT,
        "version": SCHEMA_VERSION,
        "model": policy.model.value,
        "d": policy.d,
        "a_max": policy.a_max,
        "default_landing_s": _most_common_landing(policy) if default_landing_s is None else default_landing_s,
        "entries": entries,
    }


def policy_from_dict(data: dict) -> Policy:
    if data.get("format") != POLICY_FORMAT:
        raise ValueError(f"not a policy file (format={data.get('format')!r})")
    if data.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported policy file version {data.get('version')!r}")
    params = GameParams(Model(data["model"]), 0.0, data["d"], data.get("a_max"))
    default_s = int(data.get("default_landing_s", 0))
    if default_s < 0:
        raise ValueError("default_landing_s must be non-negative")
    given = {}
    for e in data["entries"]:
        st = validate_state((e["a"], e["b"]), params)
        if st in given:
            raise ValueError(f"duplicate entry for state {tuple(st)}")
        try:
            kind = _ACTION_KINDS[e["action"]]
        except KeyError:
            raise ValueError(f"unknown action {e['action']!r} at {tuple(st)}") from None
        if kind == ActionKind.CAPITULATE:
            if "s" not in e:
                raise ValueError(f"capitulate entry at {tuple(st)} needs s")
            act = Action.capitulate(int(e["s"]))
        elif "s" in e:
            raise ValueError(f"only capitulate entries take s (state {tuple(st)})")
        else:
            act = Action(kind)
        if classify(st, params) is StateClass.WINNING or not is_legal(st, act, params):
            raise IllegalActionError(f"action {act} is not legal at {tuple(st)}")
        given[st] = act

    def pick(st):
        return given.get(st) or _default_action(st, params, default_s)

    policy = Policy.from_actions(params, pick)
    return policy.validate()


def _policy_json(data: dict) -> str:
    # one entry per line keeps large files diffable
    head = {k: v for k, v in data.items() if k != "entries"}
    lines = [json.dumps(head, indent=2)[:-2] + ',\n  "entries": [']
    lines.append(",\n".join("    " + json.dumps(e) for e in data["entries"]))
    lines.append("  ]\n}\n")
    return "\n".join(lines)


def dump_policy(policy: Policy, path=None, default_landing_s: int | None = None) -> str:
    text = _policy_json(policy_to_dict(policy, default_landing_s))
    if path is not None:
        Path(path).write_text(text)
    return text


def load_policy(path_or_text) -> Policy:
    text = str(path_or_text)
    if not text.lstrip().startswith("{"):
        text = Path(path_or_text).read_text()
    return policy_from_dict(json.loads(text))


# manifests and reports

@dataclass
class RunManifest:
    command: str
    params: dict
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    argv: list[str] = field(default_factory=list)
    version: str = __version__
    duration_s: float | None = None

    def to_dict(self) -> dict:
        out = {
            "tool": "minegames",
            "version": self.version,
            "command": self.command,
            "argv": list(self.argv),
            "params": self.params,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        if self.duration_s is not None:
            out["duration_s"] = self.duration_s
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, Model):
        return obj.value
    return obj


def report_json(kind: str, manifest: RunManifest, result: dict) -> str:
    doc = {"format": REPORT_FORMAT, "version": SCHEMA_VERSION, "kind": kind, "manifest": manifest.to_dict(), "result": result}
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def potential_triples(potential: np.ndarray) -> list[list]:
    """``[a, b, value]`` for every finite cell, ``b`` then ``a`` ascending."""
    out = []
    for b in range(potential.shape[0]):
        for a in range(potential.shape[1]):
            v = potential[b, a]
            if np.isfinite(v):
                out.append([a, b, float(v)])
    return out


def solve_result(report) -> dict:
    """Serializable body of an immediate or strategic solve report."""
    res = {
        **params_dict(report.params),
        "g_star": report.g_star,
        "frontier_is_best_response": report.frontier_is_best_response,
        "majority_flag": report.majority_flag,
        "iterations": report.iterations,
        "residual": report.residual,
        "g_delta": report.g_delta,
        "tol": report.tol,
    }
    if hasattr(report, "truncation_sensitivity"):
        res["truncation_sensitivity"] = report.truncation_sensitivity
        res["sensitivity_a_max"] = report.sensitivity_a_max
    res["potential"] = potential_triples(report.potential)
    res["policy"] = policy_to_dict(report.policy)
    return res


def threshold_row(res) -> dict:
    return {"d": res.d, "threshold": res.p_hat, "bracket_low": res.bracket[0], "bracket_high": res.bracket[1]}


def threshold_result(res) -> dict:
    return {
        "model": res.model.value,
        **threshold_row(res),
        "gap_at_bracket": res.gap_at_bracket,
        "deviation_eps": res.deviation_eps,
        "a_max": res.a_max,
        "scan": [[p, g] for p, g in res.scan],
    }


def sim_result(report, params: GameParams, policy_name: str, target_levels: int, trials: int) -> dict:
    return {
        **params_dict(params),
        "policy": policy_name,
        "target_levels": target_levels,
        "trials": trials,
        "empirical_gain": report.empirical_gain,
        "stderr": report.stderr,
        "ci95": report.ci95,
        "phases_run": report.phases_run,
        "horizon_convention": report.horizon_convention,
        "per_trial": report.per_trial,
        "trial_details": [
            {"levels": t.levels, "miner1_paid": t.miner1_paid, "miner2_paid": t.miner2_paid,
             "phases": t.phases, "max_lead": t.max_lead, "max_b": t.max_b}
            for t in report.trials
        ],
    }


def csv_text(header: list[str], rows, manifest: RunManifest | None = None) -> str:
    """Comma-separated with a header row; the manifest rides in one leading ``#`` line."""
    buf = _io.StringIO()
    if manifest is not None:
        buf.write("# manifest: " + json.dumps(_jsonable(manifest.to_dict()), separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def read_csv_rows(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_output(text: str, path=None, stream=None):
    if path is None:
        stream.write(text)
    else:
        Path(path).write_text(text)
