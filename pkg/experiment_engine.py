import time
import logging
from pathlib import Path
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import config_engine
from fock_core import WaveFunction
from lattice_engine import (
    ChainSpec,
    ground_state,
    confined_ground_state,
    evolve_many,
    density,
    energy,
    interaction_energy,
    free_orbitals,
)
from projection_engine import eta_all, reconstruct_W
from optimizer_engine import OptimizerConfig, OptimizationResult, optimize
from closed_forms import (
    one_particle_rdm,
    upper_bound,
    imax_two_fermion,
    density_distance_bound_check,
    bound_report_line,
)
from artifact_store import ArtifactStore, load_wavefunction, spec_hash
from errors import ConfigError

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    "convergence_trace",
    "slow_tail",
    "gs_sweep",
    "quench_fidelity",
    "density_compare",
    "bound_report",
    "optimize",
)

# --- 実験ごとの既定値 ---
DEFAULTS = {
    "convergence_trace": {"l": 20, "n": 4, "u": 1.0, "m_list": [4], "t_grid": [10.0, 40.0]},
    "slow_tail": {
        "l_range": [12],
        "n": 3,
        "u": 1.0,
        "u_quench": 0.0,
        "l_i": [5],
        "t_grid": [20.0],
        "restarts": 9,
    },
    "gs_sweep": {"n": 5, "u_list": [1.0, 10.0], "l_range": list(range(5, 15))},
    "quench_fidelity": {
        "l": 25,
        "n": 3,
        "u": 1.0,
        "l_i": [3, 5],
        "m_list": [3, 4, 5, 6, 7, 8],
        "t_grid": [float(t) for t in range(0, 101)],
    },
    "density_compare": {
        "l": 25,
        "n": 3,
        "u": 1.0,
        "l_i": [3, 5],
        "m_list": [3, 8],
        "t_grid": [20.0, 100.0],
    },
    "bound_report": {"l": 25, "n": 3, "u": 1.0, "l_i": [3], "m_list": [3, 4, 5, 6], "t_grid": [20.0]},
    "optimize": {},
}

OPTIMIZER_DEFAULTS = {
    "restarts": 6,
    "max_sweeps": 500,
    "sweep_tolerance": 1e-12,
    "seed": 0,
    "init": "random",
}


@dataclass
class ExperimentSpec:
    kind: str
    length: int | None = None
    n_particles: int | None = None
    interaction: float = 0.0
    u_quench: float | None = None
    confinements: list = field(default_factory=list)
    u_list: list = field(default_factory=list)
    t_grid: list = field(default_factory=list)
    m_list: list = field(default_factory=list)
    l_range: list = field(default_factory=list)
    restarts: int = 6
    max_sweeps: int = 500
    sweep_tolerance: float = 1e-12
    seed: int = 0
    init: str = "random"
    workers: int = 1
    output_dir: Path = field(default_factory=config_engine.get_output_dir)
    wavefunction: Path | None = None
    source: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_config(cls, values: dict, kind: str | None = None) -> "ExperimentSpec":
        """パース済みの設定値 (config_engine.parse_experiment_values の結果) から作る"""
        values = dict(values)
        declared = values.get("kind")
        kind = kind or declared
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"不明な実験の種類です: {kind!r} (有効: {', '.join(EXPERIMENT_KINDS)})")
        if declared is not None and declared != kind:
            raise ConfigError(f"設定ファイルの kind={declared} がサブコマンド {kind} と一致しません。")
        merged = {**OPTIMIZER_DEFAULTS, **DEFAULTS[kind], **values, "kind": kind}
        # U だけが指定されたら既定の U_LIST より優先する
        if "u" in values and "u_list" not in values:
            merged["u_list"] = [values["u"]]

        spec = cls(
            kind=kind,
            length=merged.get("l"),
            n_particles=merged.get("n"),
            interaction=float(merged.get("u", 0.0)),
            u_quench=merged.get("u_quench"),
            confinements=list(merged.get("l_i", [])),
            u_list=list(merged.get("u_list", [merged.get("u", 0.0)])),
            t_grid=list(merged.get("t_grid", [])),
            m_list=list(merged.get("m_list", [])),
            l_range=list(merged.get("l_range", [])),
            restarts=merged["restarts"],
            max_sweeps=merged["max_sweeps"],
            sweep_tolerance=merged["sweep_tolerance"],
            seed=merged["seed"],
            init=merged["init"],
            workers=merged.get("workers") or config_engine.get_workers(),
            output_dir=Path(merged["output_dir"]) if "output_dir" in merged else config_engine.get_output_dir() / kind,
            wavefunction=Path(merged["wavefunction"]) if "wavefunction" in merged else None,
            source=merged,
        )
        spec.validate()
        return spec

    def validate(self):
        if self.restarts < 1:
            raise ConfigError(f"restarts は 1 以上である必要があります: {self.restarts}")
        if self.max_sweeps < 1 or not self.sweep_tolerance > 0:
            raise ConfigError("max_sweeps >= 1 かつ sweep_tolerance > 0 である必要があります。")
        if self.init not in ("random", "natural"):
            raise ConfigError(f"init は random か natural です: {self.init!r}")
        if self.kind == "optimize":
            if self.wavefunction is None:
                raise ConfigError("optimize には wavefunction キーが必要です。")
            return
        n = self._require("n_particles", "N")
        if self.kind == "gs_sweep":
            if not self.l_range:
                raise ConfigError("gs_sweep には L_range が必要です。")
            for length in self.l_range:
                if length < n:
                    raise ConfigError(f"L_range の L={length} が N={n} より小さいです。")
            return
        if self.kind == "slow_tail":
            for length, confinement in self.chain_pairs():
                if not n <= confinement <= length:
                    raise ConfigError(f"N <= L_i <= L である必要があります (L={length}, L_i={confinement})。")
            return
        length = self._require("length", "L")
        if length < n:
            raise ConfigError(f"N <= L である必要があります (L={length}, N={n})。")
        for m in self.m_list:
            if not n <= m <= length:
                raise ConfigError(f"N <= M <= L である必要があります (M={m}, N={n}, L={length})。")
        for confinement in self.confinements:
            if not n <= confinement <= length:
                raise ConfigError(f"N <= L_i <= L である必要があります (L_i={confinement})。")
        if self.kind in ("quench_fidelity", "density_compare") and not self.confinements:
            raise ConfigError(f"{self.kind} には L_i が必要です。")
        if self.kind == "density_compare":
            self.checkpoints()

    def _require(self, attr: str, key: str):
        value = getattr(self, attr)
        if value is None:
            raise ConfigError(f"{self.kind} には {key} が必要です。")
        return value

    def chain_pairs(self) -> list[tuple[int, int]]:
        """slow_tail の (L, L_i) の組。片方の長さが1なら他方に合わせて複製する"""
        return _broadcast_pairs(self.l_range, self.confinements, "L_range", "L_i")

    def checkpoints(self) -> list[tuple[int, float]]:
        """density_compare の (L_i, t) の組"""
        return _broadcast_pairs(self.confinements, self.t_grid, "L_i", "t_grid")

    @property
    def evolution_interaction(self) -> float:
        return self.interaction if self.u_quench is None else float(self.u_quench)

    @property
    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.restarts)]

    def optimizer_config(self, n_orbitals: int, workers: int | None = None) -> OptimizerConfig:
        return OptimizerConfig(
            n_orbitals=n_orbitals,
            max_sweeps=self.max_sweeps,
            sweep_tolerance=self.sweep_tolerance,
            restarts=self.restarts,
            seed=self.seed,
            init=self.init,
            workers=workers or self.workers,
        )


def _broadcast_pairs(first: list, second: list, first_key: str, second_key: str) -> list[tuple]:
    if not first or not second:
        raise ConfigError(f"{first_key} と {second_key} の両方が必要です。")
    if len(first) == 1:
        first = first * len(second)
    elif len(second) == 1:
        second = second * len(first)
    if len(first) != len(second):
        raise ConfigError(f"{first_key} と {second_key} の長さが一致しません ({len(first)} と {len(second)})。")
    return list(zip(first, second))


def _map_points(fn, points: list, workers: int) -> list:
    """独立な格子点を並列に評価する。結果は points の順"""
    if workers <= 1 or len(points) <= 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


def _time_label(t: float) -> str:
    return f"{t:g}"


def _quench_states(spec: ExperimentSpec, confinement: int, times: list, length: int | None = None) -> list[WaveFunction]:
    """左端 L_i サイトの基底状態から閉じ込めを外して時間発展させた状態"""
    chain = ChainSpec(length or spec.length, spec.n_particles, spec.interaction, confinement)
    psi0 = confined_ground_state(chain)
    return evolve_many(chain.released(spec.evolution_interaction), psi0, times)


# --- 各実験 ---


def run_convergence_trace(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """基底状態と、左端 N サイトから解放した ψ(t) の収束の様子"""
    n = spec.n_particles
    confinement = spec.confinements[0] if spec.confinements else n
    chain = ChainSpec(spec.length, n, spec.interaction)
    states = [("ground", ground_state(chain))]
    evolved = _quench_states(spec, confinement, spec.t_grid)
    states += [(f"t{_time_label(t)}", psi) for t, psi in zip(spec.t_grid, evolved)]

    rows = []
    for m in spec.m_list:
        for label, psi in states:
            name = label if len(spec.m_list) == 1 else f"{label}_M{m}"
            result = optimize(psi, spec.optimizer_config(m))
            store.save_traces(f"trace_{name}.csv", result.traces)
            for trace in result.traces:
                rows.append(
                    {
                        "state": label,
                        "M": m,
                        "restart": trace.restart_id,
                        "seed": trace.seed,
                        "initial_I": trace.initial_objective,
                        "final_I": trace.final_objective,
                        "steps": len(trace.values),
                        "sweeps": trace.sweeps,
                        "converged": trace.converged,
                    }
                )
            logger.info(
                f"{name}: 最良 I={result.best.final_objective:.12f}, プラトー数={result.plateau_count}"
            )
    _write_rows(store, "convergence_summary.csv", rows)
    return rows


def run_slow_tail(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """U=0 クエンチ後の ψ(t) を M=L_i で近似する。厳密には I_max = 1"""
    rows = []
    for length, confinement in spec.chain_pairs():
        times = spec.t_grid
        for t, psi in zip(times, _quench_states(spec, confinement, times, length)):
            result = optimize(psi, spec.optimizer_config(confinement))
            name = f"L{length}_Li{confinement}_t{_time_label(t)}"
            store.save_traces(f"trace_{name}.csv", result.traces)
            oracle = (
                eta_all(psi, free_orbitals(length, confinement, t)).objective
                if spec.evolution_interaction == 0.0
                else float("nan")
            )
            for trace in result.traces:
                values = trace.values
                rows.append(
                    {
                        "L": length,
                        "L_i": confinement,
                        "t": t,
                        "restart": trace.restart_id,
                        "I_step15": values[14] if len(values) >= 15 else trace.final_objective,
                        "I_step100": values[99] if len(values) >= 100 else trace.final_objective,
                        "final_I": trace.final_objective,
                        "oracle_I": oracle,
                    }
                )
    _write_rows(store, "slow_tail_summary.csv", rows)
    return rows


def run_gs_sweep(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """基底状態の I_max(M=N) を L と U の格子で求める"""
    n = spec.n_particles
    points = [(u, length) for u in spec.u_list for length in spec.l_range]

    def evaluate(point):
        u, length = point
        psi = ground_state(ChainSpec(length, n, u))
        result = optimize(psi, spec.optimizer_config(n, workers=1))
        row = {
            "L": length,
            "U": u,
            "I_max": result.best.final_objective,
            "I_upper": upper_bound(psi, n),
            "spread": result.spread,
        }
        if n == 2:
            row["I_closed"] = imax_two_fermion(psi, 2).value
        return row

    rows = _map_points(evaluate, points, spec.workers)
    _write_rows(store, "gs_sweep.csv", rows)
    return rows


def run_quench_fidelity(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """閉じ込め解除後の各時刻・各 M の I_max と相互作用エネルギー"""
    released = ChainSpec(spec.length, spec.n_particles, spec.evolution_interaction)
    all_rows = []
    for confinement in spec.confinements:
        states = _quench_states(spec, confinement, spec.t_grid)
        observables = []
        for t, psi in zip(spec.t_grid, states):
            observables.append(
                [t, energy(released, psi), interaction_energy(psi, released.interaction)]
                + list(density(psi))
            )
        store.write_table(
            f"observables_Li{confinement}.csv",
            ["t", "E_total", "E_int"] + [f"n_{i}" for i in range(spec.length)],
            observables,
        )

        points = [(k, m) for k in range(len(states)) for m in spec.m_list]

        def evaluate(point):
            k, m = point
            psi = states[k]
            result = optimize(psi, spec.optimizer_config(m, workers=1))
            return {
                "t": spec.t_grid[k],
                "M": m,
                "I_max": result.best.final_objective,
                "E_int": interaction_energy(psi, released.interaction),
                "I_upper": upper_bound(psi, m),
            }

        rows = _map_points(evaluate, points, spec.workers)
        _write_rows(store, f"fidelity_Li{confinement}.csv", rows)
        all_rows.extend({"L_i": confinement, **row} for row in rows)
    return all_rows


def run_density_compare(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """厳密な ψ(t) と最適近似 W の密度分布、および密度距離の上限の確認"""
    bound_rows = []
    for confinement, t in spec.checkpoints():
        psi = _quench_states(spec, confinement, [t])[0]
        columns = {"n_exact": density(psi)}
        for m in spec.m_list:
            best = optimize(psi, spec.optimizer_config(m)).best
            w = reconstruct_W(best.amplitudes, best.orbitals).normalized()
            columns[f"n_M{m}"] = density(w)
            check = density_distance_bound_check(psi, w)
            bound_rows.append(
                {
                    "L_i": confinement,
                    "t": t,
                    "M": m,
                    "I_max": best.final_objective,
                    "epsilon": check.epsilon,
                    "delta1": check.delta1,
                    "bound": check.bound,
                    "bound_ok": check.bound_ok,
                }
            )
        rows = [
            [site] + [float(column[site]) for column in columns.values()]
            for site in range(spec.length)
        ]
        store.write_table(
            f"density_Li{confinement}_t{_time_label(t)}.csv", ["site"] + list(columns), rows
        )
    _write_rows(store, "density_bounds.csv", bound_rows)
    return bound_rows


def run_bound_report(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """最適化の結果と占有数による上限 (1/N) Σ_{i<=M} λ_i の比較"""
    chain = ChainSpec(spec.length, spec.n_particles, spec.interaction)
    states = [("ground", ground_state(chain))]
    for confinement in spec.confinements:
        evolved = _quench_states(spec, confinement, spec.t_grid)
        states += [
            (f"quench_Li{confinement}_t{_time_label(t)}", psi) for t, psi in zip(spec.t_grid, evolved)
        ]

    rows = []
    for label, psi in states:
        store.save_rdm(f"rdm_{label}.csv", one_particle_rdm(psi).matrix)
        lines = []
        for m in spec.m_list:
            i_opt = optimize(psi, spec.optimizer_config(m)).best.final_objective
            i_upper = upper_bound(psi, m)
            lines.append(bound_report_line(m, i_opt, i_upper))
            rows.append(
                {
                    "state": label,
                    "M": m,
                    "I_opt": i_opt,
                    "I_upper": i_upper,
                    "ratio": i_upper / i_opt if i_opt > 0 else float("inf"),
                }
            )
        store.write_lines(f"bound_{label}.txt", lines)
    _write_rows(store, "bound_report.csv", rows)
    return rows


def run_optimize(spec: ExperimentSpec, store: ArtifactStore) -> list[dict]:
    """ダンプした波動関数を M_list の各 M で最適化する"""
    psi = load_wavefunction(spec.wavefunction)
    if not psi.is_normalized(1e-10):
        logger.warning(f"波動関数が正規化されていません (ノルム {psi.norm():.12f})。正規化して使います。")
        psi = psi.normalized()
    m_list = spec.m_list or [psi.n_particles]
    for m in m_list:
        if not psi.n_particles <= m <= psi.d:
            raise ConfigError(f"N <= M <= d である必要があります (M={m}, N={psi.n_particles}, d={psi.d})。")

    rows = []
    for m in m_list:
        result: OptimizationResult = optimize(psi, spec.optimizer_config(m))
        best = result.best
        orbital_file = store.save_orbitals(f"orbitals_M{m}.txt", best.orbitals).name
        store.save_config_amplitudes(f"amplitudes_M{m}.csv", best.amplitudes)
        store.save_traces(f"trace_M{m}.csv", result.traces)
        record = {
            "M": m,
            "final_I": best.final_objective,
            "sweeps": best.sweeps,
            "converged": best.converged,
            "restart_finals": result.finals,
            "spread": result.spread,
            "plateau_count": result.plateau_count,
            "I_upper": upper_bound(psi, m),
            "orbital_file": orbital_file,
        }
        store.save_record(f"result_M{m}.json", record)
        rows.append(record)
    return rows


RUNNERS = {
    "convergence_trace": run_convergence_trace,
    "slow_tail": run_slow_tail,
    "gs_sweep": run_gs_sweep,
    "quench_fidelity": run_quench_fidelity,
    "density_compare": run_density_compare,
    "bound_report": run_bound_report,
    "optimize": run_optimize,
}


def _write_rows(store: ArtifactStore, name: str, rows: list[dict]):
    if not rows:
        logger.warning(f"{name} に書き込む行がありません。")
        return
    header = list(rows[0])
    for row in rows[1:]:
        header += [key for key in row if key not in header]
    store.write_table(name, header, [[row.get(key, "") for key in header] for row in rows])


def run_experiment(spec: ExperimentSpec) -> tuple[list[dict], ArtifactStore]:
    """実験を実行し、出力と manifest.json を spec.output_dir に書く"""
    store = ArtifactStore(spec.output_dir, spec.kind, spec_hash(spec.source), spec.seeds)
    logger.info(f"実験 {spec.kind} を開始します (出力先: {spec.output_dir})。")
    start = time.perf_counter()
    try:
        rows = RUNNERS[spec.kind](spec, store)
    finally:
        store.record_wall_time(spec.kind, time.perf_counter() - start)
        store.save_manifest()
    logger.info(f"実験 {spec.kind} が完了しました ({time.perf_counter() - start:.2f} 秒)。")
    return rows, store
