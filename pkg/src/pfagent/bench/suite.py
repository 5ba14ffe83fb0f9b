"""Deterministic multi-turn scenario suites.

A scenario is three turns: a baseline request, then two follow-up
operations drawn from the task-type pool, stratified over the case-family
by case-source grid. The same (families, sources, task types, n, seed)
always produces byte-identical suite files; phrasing variants and
parameters come from a per-scenario seeded generator.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .. import backend
from .scoring import WeightedCheck
from .tasks import CORE_FOLLOWUPS, EXPANDED_EXTRA, TASK_TYPES
from ..plan import PLOT_FILE_NAME

DEFAULT_FAMILIES = ("ieee14", "ieee39", "kundur", "pjm5")
DEFAULT_SOURCES = ("builtin", "uploaded")

_CASE_PHRASES = {
    "ieee14": ["the IEEE 14 bus system", "ieee14", "the IEEE-14 case"],
    "ieee39": ["the IEEE 39 bus system", "ieee39", "the New England test system"],
    "kundur": ["the Kundur two-area system", "kundur"],
    "pjm5": ["the PJM 5 bus system", "pjm5"],
}

_WORKFLOW_CHECKS = [
    (1.0, r"\.setup\(\)"),
    (1.0, r"\.run_power_flow\("),
    (1.0, r"RESULT_JSON"),
]


@dataclass(frozen=True)
class TurnSpec:
    turn_index: int
    task_type: str
    params: dict
    prompt: str
    grounding_checks: tuple[WeightedCheck, ...]
    continuity_checks: tuple[WeightedCheck, ...]
    expects_plot: bool
    plot_file: str | None

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "task_type": self.task_type,
            "params": dict(self.params),
            "prompt": self.prompt,
            "grounding_checks": [c.to_dict() for c in self.grounding_checks],
            "continuity_checks": [c.to_dict() for c in self.continuity_checks],
            "expects_plot": self.expects_plot,
            "plot_file": self.plot_file,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TurnSpec":
        return cls(
            turn_index=raw["turn_index"],
            task_type=raw["task_type"],
            params=dict(raw["params"]),
            prompt=raw["prompt"],
            grounding_checks=tuple(WeightedCheck.from_dict(c)
                                   for c in raw["grounding_checks"]),
            continuity_checks=tuple(WeightedCheck.from_dict(c)
                                    for c in raw["continuity_checks"]),
            expects_plot=raw["expects_plot"],
            plot_file=raw["plot_file"],
        )


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    family: str
    source: str  # "builtin" | "uploaded"
    case_name: str
    uploaded_file: str | None
    seed: int
    turns: tuple[TurnSpec, ...]

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "family": self.family,
            "source": self.source,
            "case_name": self.case_name,
            "uploaded_file": self.uploaded_file,
            "seed": self.seed,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioSpec":
        return cls(
            scenario_id=raw["scenario_id"], family=raw["family"],
            source=raw["source"], case_name=raw["case_name"],
            uploaded_file=raw["uploaded_file"], seed=raw["seed"],
            turns=tuple(TurnSpec.from_dict(t) for t in raw["turns"]),
        )


@dataclass
class Suite:
    seed: int
    expanded: bool
    scenarios: list[ScenarioSpec] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "seed": self.seed,
            "expanded": self.expanded,
            "n_scenarios": len(self.scenarios),
            "scenarios": [s.to_dict() for s in self.scenarios],
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True),
                        encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Suite":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        suite = cls(seed=raw["seed"], expanded=raw["expanded"])
        suite.scenarios = [ScenarioSpec.from_dict(s) for s in raw["scenarios"]]
        return suite


def materialize_uploaded_case(family: str, dest: Path) -> Path:
    """Write the uploaded-source variant of a family case into a workspace."""
    system = backend.get_case(family)
    system.name = dest.stem
    dest.parent.mkdir(parents=True, exist_ok=True)
    return system.save(dest)


def _loader_checks(source: str, case_name: str, uploaded_file: str | None):
    if source == "builtin":
        required = WeightedCheck(2.0, rf"backend\.get_case\(\s*['\"]{case_name}['\"]\s*\)")
        forbidden = WeightedCheck(2.0, r"backend\.load\(", kind="forbidden")
    else:
        fname = uploaded_file.replace(".", r"\.")
        required = WeightedCheck(2.0, rf"backend\.load\(\s*['\"]{fname}['\"]\s*\)")
        forbidden = WeightedCheck(2.0, r"backend\.get_case\(", kind="forbidden")
    return required, forbidden


def _grounding_for(turn_type: str, params: dict, source: str, case_name: str,
                   uploaded_file: str | None) -> list[WeightedCheck]:
    task = TASK_TYPES[turn_type]
    loader_req, loader_forb = _loader_checks(source, case_name, uploaded_file)
    checks = [loader_req, loader_forb]
    checks += [WeightedCheck(w, p) for w, p in _WORKFLOW_CHECKS]
    checks += [WeightedCheck(w, p) for w, p in task.api_checks(params)]
    checks += [WeightedCheck(w, p, kind="forbidden")
               for w, p in task.forbidden_checks(params)]
    return checks


def _continuity_for(prior_ops: list[tuple[str, dict]]) -> list[WeightedCheck]:
    checks: list[WeightedCheck] = []
    for task_name, params in prior_ops:
        task = TASK_TYPES[task_name]
        if not task.is_modification:
            continue
        checks += [WeightedCheck(1.0, pattern)
                   for _, pattern in task.api_checks(params)]
    return checks


def _available_followups(system: backend.System, expanded: bool) -> list[str]:
    rng_probe = random.Random(0)
    names = list(CORE_FOLLOWUPS)
    pool = []
    for name in names:
        if TASK_TYPES[name].sample_params(rng_probe, system) is not None:
            pool.append(name)
    return pool


def generate_suite(n_scenarios: int = 100, seed: int = 7,
                   families: tuple[str, ...] = DEFAULT_FAMILIES,
                   sources: tuple[str, ...] = DEFAULT_SOURCES,
                   task_types: tuple[str, ...] | None = None,
                   expanded: bool = False) -> Suite:
    """Build a stratified, fully deterministic scenario suite.

    Scenarios spread evenly over the family x source grid (remainder to
    the first cells). Follow-up ops rotate through the per-case pool so
    every task type appears, with parameters and phrasing variants drawn
    from the scenario's own seeded generator. Expanded suites add
    islanding-prone outages as third turns where the topology allows.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be >= 1")
    cells = [(fam, src) for fam in families for src in sources]
    per_cell = n_scenarios // len(cells)
    remainder = n_scenarios % len(cells)
    counts = {cell: per_cell + (1 if i < remainder else 0)
              for i, cell in enumerate(cells)}

    systems = {fam: backend.get_case(fam) for fam in families}
    pools = {fam: _available_followups(systems[fam], expanded) for fam in families}
    if task_types:
        pools = {fam: [t for t in pool if t in task_types]
                 for fam, pool in pools.items()}
    islanding_ok = {
        fam: TASK_TYPES["line_outage_islanding"].sample_params(
            random.Random(0), systems[fam]) is not None
        for fam in families
    }

    suite = Suite(seed=seed, expanded=expanded)
    index = 0
    rotation: dict[str, int] = {fam: 0 for fam in families}
    for fam, src in cells:
        for _ in range(counts[(fam, src)]):
            index += 1
            scenario_id = f"S{index:04d}"
            rng = random.Random(f"{seed}:{scenario_id}")
            system = systems[fam]
            pool = pools[fam]

            rot = rotation[fam]
            rotation[fam] += 2
            type2 = pool[rot % len(pool)]
            type3 = pool[(rot + 1) % len(pool)]
            if type3 == type2:
                type3 = pool[(rot + 2) % len(pool)]
            if (expanded and islanding_ok[fam] and index % 3 == 0):
                type3 = "line_outage_islanding"

            uploaded_file = f"my_{fam}.json" if src == "uploaded" else None
            case_name = fam
            case_phrase = (f"the uploaded case {uploaded_file}" if uploaded_file
                           else rng.choice(_CASE_PHRASES[fam]))

            ops: list[tuple[str, dict]] = []
            turns: list[TurnSpec] = []
            for turn_index, task_name in enumerate(("baseline", type2, type3), start=1):
                task = TASK_TYPES[task_name]
                params = task.sample_params(rng, system)
                assert params is not None, (task_name, fam)
                phrasing = rng.choice(
                    task.phrasings(params, case_phrase if turn_index == 1 else None)
                )
                continuity = _continuity_for(ops)
                grounding = _grounding_for(task_name, params, src, case_name,
                                           uploaded_file)
                turns.append(TurnSpec(
                    turn_index=turn_index,
                    task_type=task_name,
                    params=params,
                    prompt=phrasing,
                    grounding_checks=tuple(grounding),
                    continuity_checks=tuple(continuity),
                    expects_plot=task.expects_plot,
                    plot_file=PLOT_FILE_NAME if task.expects_plot else None,
                ))
                ops.append((task_name, params))

            suite.scenarios.append(ScenarioSpec(
                scenario_id=scenario_id, family=fam, source=src,
                case_name=case_name, uploaded_file=uploaded_file,
                seed=seed, turns=tuple(turns),
            ))
    return suite
