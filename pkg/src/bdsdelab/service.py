"""HTTP wrapper over the scenario runner (FastAPI, in-process computation)."""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import CONFIG_KEYS, resolve
from .errors import BdsdeError
from .noise import RNG_METHOD
from .scenarios import SCENARIOS, run_scenario


class ScenarioInfo(BaseModel):
    name: str
    description: str
    defaults: dict


class RunRequest(BaseModel):
    scenario: str
    overrides: dict = Field(default_factory=dict,
                            description="config keys overriding scenario defaults")
    seed: Optional[int] = Field(default=None, ge=0, lt=2 ** 64)


class CheckResult(BaseModel):
    check: str
    metric: str
    value: float
    threshold: float
    passed: bool


class RunResponse(BaseModel):
    scenario: str
    all_passed: bool
    checks: list[CheckResult]
    resolved_config: dict
    code_version: str
    rng_method: str


app = FastAPI(title="bdsdelab", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/scenarios", response_model=list[ScenarioInfo])
def scenarios() -> list[ScenarioInfo]:
    return [ScenarioInfo(name=s.name, description=s.description,
                         defaults=s.defaults) for s in SCENARIOS.values()]


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    if req.scenario not in SCENARIOS:
        raise HTTPException(status_code=404,
                            detail=f"unknown scenario {req.scenario!r}")
    unknown = [k for k in req.overrides if k not in CONFIG_KEYS or k == "scenario"]
    if unknown:
        raise HTTPException(status_code=422,
                            detail=f"unknown config keys: {sorted(unknown)}")
    config = dict(req.overrides)
    if req.seed is not None:
        config["seed"] = req.seed
    resolved = resolve(config, SCENARIOS[req.scenario].defaults)
    resolved.pop("scenario", None)
    try:
        outcome = run_scenario(req.scenario, resolved)
    except BdsdeError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return RunResponse(
        scenario=outcome.scenario,
        all_passed=outcome.all_passed,
        checks=[CheckResult(check=r.check, metric=r.metric, value=r.value,
                            threshold=r.threshold, passed=r.passed)
                for r in outcome.checks],
        resolved_config=resolved,
        code_version=__version__,
        rng_method=RNG_METHOD,
    )
