"""Alternating bath/kick runs, scenario presets, sweeps and output files."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .dissipative import DissipativeMap, stationary_chord
from .grid import ChordState, GridSpec, coherent_state, read_grid, write_grid, CHORD_MAGIC, WIGNER_MAGIC
from .kick import KickMap
from .model import ModelParams, ParameterError, check_params, validate
from .observables import (CSV_HEADER, UnderResolvedError, cycle_stats, marginals, moments,
                          wigner, write_series_csv, write_wigner)

__all__ = [
    "ScenarioError",
    "TraceDriftError",
    "LeakBudgetError",
    "UnderResolvedMomentError",
    "GridRequest",
    "InitialState",
    "Scenario",
    "RunResult",
    "run_scenario",
    "kicks_to_energy",
    "SweepSpec",
    "run_sweep",
    "PRESETS",
    "preset",
    "KickedOscillator",
]

FORMAT_VERSION = "1"
OUTPUT_KINDS = frozenset({"series", "chord", "wigner", "marginals"})


class ScenarioError(RuntimeError):
    """A run aborted; ``kick`` is the index of the kick being processed."""

    def __init__(self, message: str, kick: int):
        super().__init__(f"kick {kick}: {message}")
        self.kick = kick


class TraceDriftError(ScenarioError):
    pass


class LeakBudgetError(ScenarioError):
    pass


class UnderResolvedMomentError(ScenarioError):
    pass


@dataclass(frozen=True)
class GridRequest:
    """Grid size and extent, resolved per parameter set.

    With ``commensurate`` the spacing is adjusted so that the kick shift is an
    exact node stride; the extents then come out close to the requested ones.
    """

    nk: int = 513
    k_max: float = 10.0
    ns: int | None = None
    s_max: float | None = None
    commensurate: bool = True

    def resolve(self, params: ModelParams) -> GridSpec:
        if self.commensurate:
            return GridSpec.commensurate(self.nk, self.k_max, params.kick_shift, self.ns, self.s_max)
        ns = self.nk if self.ns is None else self.ns
        s_max = self.k_max if self.s_max is None else self.s_max
        return GridSpec(self.nk, ns, self.k_max, s_max)


@dataclass(frozen=True)
class InitialState:
    """``kind`` is ``"coherent"`` (uses x0, p0), ``"stationary"`` (uses D) or ``"file"`` (uses path)."""

    kind: str = "coherent"
    x0: float = 0.0
    p0: float = 0.0
    D: float | None = None
    path: str | None = None

    def build(self, grid: GridSpec, params: ModelParams) -> ChordState:
        if self.kind == "coherent":
            return coherent_state(grid, self.x0, self.p0)
        if self.kind == "stationary":
            return stationary_chord(grid, params.D if self.D is None else self.D)
        if self.kind == "file":
            if self.path is None:
                raise ValueError("initial state 'file' needs a path")
            return read_grid(self.path)
        raise ValueError(f"unknown initial state kind {self.kind!r}")


def _parse_snapshot(item) -> tuple[int, str]:
    if isinstance(item, str):
        item = item.strip()
        if not item or item[-1] not in "+-":
            raise ValueError(f"snapshot {item!r} must look like '36+' or '36-'")
        return int(item[:-1]), item[-1]
    n, side = item
    if side not in ("+", "-"):
        raise ValueError(f"snapshot side must be '+' or '-', got {side!r}")
    return int(n), side


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run.

    ``snapshots`` holds entries like ``"35+"`` (right after kick 35) or
    ``"36-"`` (right before kick 36); ``"0+"`` is the initial state.
    ``leak_budget=None`` disables the leak abort.
    """

    params: ModelParams
    grid: GridSpec | GridRequest = field(default_factory=GridRequest)
    initial: InitialState = field(default_factory=InitialState)
    n_kicks: int = 0
    snapshots: tuple = ()
    outputs: frozenset = frozenset({"series"})
    out_dir: str | None = None
    name: str = "scenario"
    trace_tol: float = 1e-3
    trace_warn: float = 1e-4
    leak_budget: int | None = 0
    leak_tol: float = 1e-10
    scheme: str = "spectral"
    kick_tol: float = 1e-14
    kick_interpolation: str = "linear"
    kick_first: bool = False
    check_resolution: bool = True

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(_parse_snapshot(s) for s in self.snapshots))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        self.validate()

    def validate(self) -> None:
        report = validate(self.params)
        if not report.ok:
            raise ParameterError(str(report))
        if self.n_kicks < 0:
            raise ValueError("n_kicks must be >= 0")
        for n, side in self.snapshots:
            if n < 0 or n > self.n_kicks or (n == 0 and side == "-"):
                raise ValueError(f"snapshot {n}{side} outside 0+..{self.n_kicks}+")
        unknown = self.outputs - OUTPUT_KINDS
        if unknown:
            raise ValueError(f"unknown outputs {sorted(unknown)}; choose from {sorted(OUTPUT_KINDS)}")
        if self.leak_budget is not None and self.leak_budget < 0:
            raise ValueError("leak_budget must be >= 0 or None")

    def resolved_grid(self) -> GridSpec:
        return self.grid if isinstance(self.grid, GridSpec) else self.grid.resolve(self.params)

    def with_params(self, **changes) -> "Scenario":
        return replace(self, params=self.params.replace(**changes))


@dataclass
class RunResult:
    state: ChordState
    rows: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def series(self) -> np.ndarray:
        """``(E_minus, E_plus)`` per kick."""
        return np.array([[r[2], r[3]] for r in self.rows]).reshape(-1, 2)

    @property
    def table(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(CSV_HEADER))


class _Runner:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.params = check_params(sc.params)
        self.grid = sc.resolved_grid()
        p = self.params
        self.diss = DissipativeMap(p.beta, p.D, p.sigma_k, sc.scheme, sc.leak_tol).fit(self.grid)
        self.kick = KickMap(p.kappa, p.eta2, sc.kick_tol, sc.kick_interpolation,
                            sc.leak_tol).fit(self.grid)
        self.warned = []

    def check(self, state: ChordState, n: int) -> None:
        sc = self.sc
        drift = abs(state.trace - 1.0)
        if drift > sc.trace_tol:
            raise TraceDriftError(f"trace drift |w(0,0) - 1| = {drift:.3e} > {sc.trace_tol}", n)
        if drift > sc.trace_warn and not self.warned:
            msg = f"kick {n}: trace drift {drift:.3e} above warning level {sc.trace_warn}"
            self.warned.append(msg)
            warnings.warn(msg, stacklevel=3)
        if sc.leak_budget is not None and state.boundary_leak > sc.leak_budget:
            raise LeakBudgetError(
                f"boundary leak {state.boundary_leak} exceeds budget {sc.leak_budget}; "
                "enlarge the grid extent", n)

    def moments(self, state: ChordState, n: int):
        try:
            return moments(state, self.sc.check_resolution)
        except UnderResolvedError as exc:
            raise UnderResolvedMomentError(str(exc), n) from None


def _starts_before_kick(state: ChordState, sigma: float, kick_first: bool) -> bool:
    """Whether the stored state sits between the bath step and the kick of its period."""
    phase = state.tau / sigma - state.n_kicks
    if kick_first:
        return False
    return abs(phase - 1.0) < 1e-6


def run_scenario(sc: Scenario, stop_energy: float | None = None) -> RunResult:
    """Alternate bath propagation and kicks for ``sc.n_kicks`` periods.

    Each period propagates for ``2 pi / q``, records ``E_minus``, kicks and
    records ``E_plus`` (``kick_first`` swaps the two maps).  A state read
    from a snapshot file resumes at its stored kick count.  With
    ``stop_energy`` the run ends after the first kick with ``E_plus >= stop_energy``.
    """
    r = _Runner(sc)
    sigma = r.params.sigma_k
    state = sc.initial.build(r.grid, r.params)
    if state.grid != r.grid:
        raise ValueError(f"initial state grid {state.grid} differs from scenario grid {r.grid}")
    result = RunResult(state)
    wanted = set(sc.snapshots)
    out = sc.out_dir
    if out is not None:
        os.makedirs(out, exist_ok=True)

    def snap(n, side, st):
        if (n, side) in wanted:
            label = f"{n}{side}"
            result.snapshots[label] = st
            if out is not None:
                result.files += _write_snapshot(st, out, label, sc.outputs)

    if state.n_kicks == 0 and state.tau == 0.0:
        snap(0, "+", state)
    pending_kick = _starts_before_kick(state, sigma, sc.kick_first)
    for n in range(state.n_kicks + 1, sc.n_kicks + 1):
        if not sc.kick_first and not pending_kick:
            state = r.diss.transform(state)
            r.check(state, n)
        pending_kick = False
        before = r.moments(state, n)
        snap(n, "-", state)
        state = r.kick.transform(state)
        r.check(state, n)
        after = r.moments(state, n)
        snap(n, "+", state)
        result.rows.append((n, state.tau, before.energy, after.energy) + after.as_tuple())
        if sc.kick_first:
            state = r.diss.transform(state)
            r.check(state, n)
        if stop_energy is not None and after.energy >= stop_energy:
            break
    result.state = state
    result.warnings = r.warned
    if out is not None:
        if "series" in sc.outputs:
            path = os.path.join(out, "series.csv")
            write_series_csv(path, result.rows)
            result.files.append(path)
        result.files.append(write_manifest(sc, r.grid, os.path.join(out, "manifest.txt"), result))
    return result


def _write_snapshot(state: ChordState, out: str, label: str, outputs) -> list:
    tag = label.replace("+", "plus").replace("-", "minus")
    files = []
    if "chord" in outputs:
        path = os.path.join(out, f"chord_{tag}.chord")
        write_grid(state, path)
        files.append(path)
    if "wigner" in outputs:
        path = os.path.join(out, f"wigner_{tag}.wig")
        write_wigner(wigner(state), path)
        files.append(path)
    if "marginals" in outputs:
        path = os.path.join(out, f"marginals_{tag}.csv")
        z, P, p, Q = marginals(state)
        with open(path, "w") as fh:
            fh.write("z,P,p,Q\n")
            for row in zip(z, P, p, Q):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        files.append(path)
    return files


def write_manifest(sc: Scenario, grid: GridSpec, path: str, result: RunResult | None = None) -> str:
    lines = [f"name = {sc.name}", f"format_version = {FORMAT_VERSION}",
             f"chord_format = {CHORD_MAGIC}", f"wigner_format = {WIGNER_MAGIC}",
             f"csv_columns = {','.join(CSV_HEADER)}"]
    for k, v in asdict(sc.params).items():
        lines.append(f"{k} = {v!r}")
    lines.append(f"eta2 = {sc.params.eta2!r}")
    lines.append(f"sigma_k = {sc.params.sigma_k!r}")
    lines += [f"nk = {grid.nk}", f"ns = {grid.ns}", f"k_max = {grid.k_max!r}",
              f"s_max = {grid.s_max!r}", f"commensurate = {grid.commensurate_mode}"]
    init = sc.initial
    lines.append(f"initial = {init.kind}")
    for k in ("x0", "p0", "D", "path"):
        v = getattr(init, k)
        if v is not None:
            lines.append(f"initial_{k} = {v!r}")
    for k in ("n_kicks", "trace_tol", "trace_warn", "leak_budget", "leak_tol", "scheme",
              "kick_tol", "kick_interpolation", "kick_first", "check_resolution"):
        lines.append(f"{k} = {getattr(sc, k)!r}")
    lines.append("snapshots = " + ",".join(f"{n}{s}" for n, s in sc.snapshots))
    lines.append("outputs = " + ",".join(sorted(sc.outputs)))
    if result is not None:
        lines.append(f"kicks_done = {result.state.n_kicks}")
        lines.append(f"boundary_leak = {result.state.boundary_leak}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def kicks_to_energy(sc: Scenario, E_target: float, n_max: int | None = None) -> int | None:
    """Smallest kick count ``n`` with ``E_plus(n) >= E_target``; ``None`` if not reached by ``n_max``."""
    n_max = sc.n_kicks if n_max is None else n_max
    sc = replace(sc, n_kicks=n_max, snapshots=(), out_dir=None)
    grid = sc.resolved_grid()
    E0 = moments(sc.initial.build(grid, sc.params), False).energy
    if not E_target > E0:
        raise ValueError(f"E_target={E_target} must exceed the initial energy {E0:.6g}")
    result = run_scenario(sc, stop_energy=E_target)
    if result.rows and result.rows[-1][3] >= E_target:
        return int(result.rows[-1][0])
    return None


# -- sweeps ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep over ``eta2`` or ``beta``.

    ``reduction="cycle"`` reports limit-cycle energy and heat flux over the last
    ``window`` kicks; ``reduction="kicks"`` reports the kicks needed to reach
    ``E_target`` (at most ``base.n_kicks``).
    """

    base: Scenario
    parameter: str
    values: tuple
    reduction: str = "cycle"
    E_target: float | None = None
    window: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.parameter not in ("eta2", "beta"):
            raise ValueError(f"sweep parameter must be 'eta2' or 'beta', got {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep value list is empty")
        d = np.diff(self.values)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep values must be strictly monotone")
        if self.reduction not in ("cycle", "kicks"):
            raise ValueError(f"unknown reduction {self.reduction!r}")
        if self.reduction == "kicks" and self.E_target is None:
            raise ValueError("reduction 'kicks' needs E_target")

    def point(self, value: float) -> Scenario:
        return replace(self.base.with_params(**{self.parameter: value}), out_dir=None,
                       snapshots=())


SWEEP_COLUMNS = ("value", "E_qst", "heat_flux", "converged", "kicks", "error")


def _sweep_point(sw: SweepSpec, value: float) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row["value"] = value
    try:
        sc = sw.point(value)
        if sw.reduction == "cycle":
            res = run_scenario(sc)
            cs = cycle_stats(res.series, sc.params.q, sw.window)
            row.update(E_qst=cs.E_qst, heat_flux=cs.heat_flux, converged=cs.converged)
        else:
            n = kicks_to_energy(sc, sw.E_target)
            row["kicks"] = "not-reached" if n is None else n
    except (ScenarioError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(sw: SweepSpec, path: str | None = None, n_jobs: int = 1) -> list[dict]:
    """Evaluate every sweep point independently; failures are recorded in the ``error`` column."""
    if n_jobs == 1:
        rows = [_sweep_point(sw, v) for v in sw.values]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            rows = list(ex.map(_sweep_point, [sw] * len(sw.values), sw.values))
    if path is not None:
        write_sweep_csv(path, rows, sw.parameter)
    return rows


def write_sweep_csv(path: str, rows: list[dict], parameter: str = "value") -> None:
    with open(path, "w") as fh:
        fh.write(",".join((parameter,) + SWEEP_COLUMNS[1:]) + "\n")
        for r in rows:
            vals = []
            for c in SWEEP_COLUMNS:
                v = r[c]
                vals.append(repr(v) if isinstance(v, float) else str(v).replace(",", ";"))
            fh.write(",".join(vals) + "\n")


# -- presets --------------------------------------------------------------------------

_STRONG = dict(beta=0.1, D=5.0, q=4.0)
_ETA2 = {
    "resonant": math.pi,
    "nonresonant": 0.7 * math.pi,
    "nonresonant-golden": (1.0 + math.sqrt(5.0)) * math.pi / 2.0,
}


def _scenario(name, beta, D, kappa, eta2, q, n_kicks, nk=513, k_max=10.0, **kw) -> Scenario:
    return Scenario(params=ModelParams.from_eta2(beta, D, kappa, eta2, q),
                    grid=GridRequest(nk, k_max), n_kicks=n_kicks, name=name, **kw)


def _fig1(name, kappa, eta2):
    return _scenario(name, kappa=kappa, eta2=eta2, n_kicks=36, snapshots=("35+", "36-", "36+"),
                     outputs={"series", "chord", "wigner", "marginals"}, **_STRONG)


def _fig4(case, beta):
    kappa, eta2, q = {
        "resonant": (-0.8, math.pi, 4.0),
        "nonresonant": (-0.8, _ETA2["nonresonant-golden"], 4.0),
        "chaotic": (-4.5, 1.0, 6.0),
    }[case]
    # weak damping lets the state spread: wider, coarser grids and no moment resolution check
    nk, k_max = {0.1: (513, 10.0), 0.01: (1025, 30.0), 0.001: (1025, 50.0)}[beta]
    if case == "chaotic" and beta == 0.1:
        # the q=6 kick sequence spreads the chord function past k=10
        nk, k_max = 1025, 24.0
    return _scenario(f"fig4-{case}-b{beta:g}", beta, 5.0, kappa, eta2, q, 36, nk, k_max,
                     snapshots=("36+",), outputs={"series", "chord", "wigner"},
                     leak_budget=None if beta < 0.1 else 0, check_resolution=beta >= 0.1)


def _fig6(beta):
    # near-pure states need dk < 0.04 to resolve the peak up to E = 50; their far
    # coherences always leak, which leaves the energies unchanged (checked up to k = 30)
    nk, k_max = (385, 12.0) if beta >= 0.01 else (961, 19.0)
    base = _scenario(f"fig6-b{beta:g}", beta, 5.0, -0.8, math.pi / 2, 4.0, 250, nk, k_max,
                     leak_budget=None)
    return SweepSpec(base, "eta2", tuple(math.pi * np.linspace(0.4, 0.6, 11)), "kicks",
                     E_target=50.0)


def _build_presets() -> dict:
    p = {
        "fig1-resonant": _fig1("fig1-resonant", -0.8, _ETA2["resonant"]),
        "fig1-nonresonant": _fig1("fig1-nonresonant", -0.8, _ETA2["nonresonant"]),
        "fig1-chaotic": _fig1("fig1-chaotic", -4.5, 1.0),
        "fig2": [
            _scenario(f"fig2-{n}", kappa=k, eta2=e, n_kicks=60, **_STRONG)
            for n, k, e in (("resonant", -0.8, math.pi), ("nonresonant", -0.8, 0.7 * math.pi),
                            ("chaotic", -4.5, 1.0))
        ],
        "fig3": SweepSpec(_scenario("fig3", kappa=-0.8, eta2=math.pi, n_kicks=60, **_STRONG),
                          "eta2", tuple(math.pi * np.linspace(0.2, 1.0, 9)), "cycle", window=20),
        "fig5": [
            _scenario(f"fig5-b{b:g}", b, 5.0, -0.8, math.pi, 4.0, 40, 1025, 25.0,
                      leak_budget=None if b < 0.1 else 0)
            for b in (1e-5, 1e-4, 1e-3, 1e-2, 0.1)
        ],
        "fig6": [_fig6(b) for b in (1e-6, 1e-5, 1e-3, 0.002, 0.004, 0.01)],
    }
    for case in ("resonant", "nonresonant", "chaotic"):
        for b in (0.001, 0.01, 0.1):
            p[f"fig4-{case}-b{b:g}"] = _fig4(case, b)
    return p


PRESETS = _build_presets()


def preset(name: str):
    """Scenario, list of scenarios or sweep registered under ``name``."""
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


# -- estimator front end ------------------------------------------------------------------

class KickedOscillator(BaseEstimator):
    """Kicked oscillator in a bath with a scikit-learn style interface.

    ``fit(X)`` builds both maps for the grid of the chord state ``X`` (or a
    :class:`GridSpec`, starting from the coherent vacuum); ``transform``
    advances a state by ``n_kicks`` periods and returns the final state;
    ``predict`` returns the per-kick ``(E_minus, E_plus)`` energies.
    """

    def __init__(self, beta=0.1, D=5.0, kappa=-0.8, eta2=math.pi, q=4.0, n_kicks=10,
                 scheme="spectral", kick_tol=1e-14, leak_budget=None, leak_tol=1e-10,
                 check_resolution=True):
        self.beta = beta
        self.D = D
        self.kappa = kappa
        self.eta2 = eta2
        self.q = q
        self.n_kicks = n_kicks
        self.scheme = scheme
        self.kick_tol = kick_tol
        self.leak_budget = leak_budget
        self.leak_tol = leak_tol
        self.check_resolution = check_resolution

    def _scenario(self, grid: GridSpec, n_kicks: int) -> Scenario:
        return Scenario(
            params=ModelParams.from_eta2(self.beta, self.D, self.kappa, self.eta2, self.q),
            grid=grid, n_kicks=n_kicks, scheme=self.scheme, kick_tol=self.kick_tol,
            leak_budget=self.leak_budget, leak_tol=self.leak_tol,
            check_resolution=self.check_resolution)

    def fit(self, X, y=None):
        grid = X.grid if isinstance(X, ChordState) else X
        if not isinstance(grid, GridSpec):
            raise TypeError("fit expects a ChordState or GridSpec")
        self.params_ = check_params(
            ModelParams.from_eta2(self.beta, self.D, self.kappa, self.eta2, self.q))
        self.grid_ = grid
        self.runner_ = _Runner(self._scenario(grid, 0))
        return self

    def _run(self, X):
        if not hasattr(self, "grid_"):
            self.fit(X)
        state = X.copy() if isinstance(X, ChordState) else coherent_state(self.grid_)
        r = self.runner_
        rows = []
        start = state.n_kicks
        for n in range(start + 1, start + self.n_kicks + 1):
            state = r.diss.transform(state)
            r.check(state, n)
            e_minus = r.moments(state, n).energy
            state = r.kick.transform(state)
            r.check(state, n)
            rows.append((e_minus, r.moments(state, n).energy))
        return state, np.array(rows).reshape(-1, 2)

    def transform(self, X):
        return self._run(X)[0]

    def predict(self, X):
        return self._run(X)[1]
