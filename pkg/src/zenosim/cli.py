"""Command-line entry point: one subcommand per reproducible experiment,
deterministic CSV + JSON outputs keyed by the spec hash.

Exit codes: 0 ok, 2 spec error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import bounds, calib, metrics, tomo, zeno
from .device import DriveConfig, TWO_PI
from .experiment import PROTOCOLS, ExperimentSpec, SpecError, SweepResult, parse_spec
from .lindblad import NumericalError
from .traject import escape_detector

__all__ = ["main"]

_COMP_LABELS = ("gg", "ge", "eg", "ee", "fg", "fe")


def _worker_init():
    # sweep workers each stay single-threaded; the pool provides parallelism
    os.environ["OMP_NUM_THREADS"] = "1"
    os.environ["OPENBLAS_NUM_THREADS"] = "1"


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with Pool(min(jobs, len(items)), initializer=_worker_init) as pool:
        return pool.map(fn, items)


# ----------------------------------------------------------------------------
# subcommand workers (module level: picklable for the pool)


def _block_point(args):
    spec, rabi, eps, model = args
    return zeno.blocking_experiment(spec.device, rabi, (eps,), model,
                                    n_fock=spec.sim["fock_dim"], dt_us=spec.dt_us())[0]


def _gate_trajectory_point(args):
    spec, table_shifts, seed, n_fock = args
    drives = spec.drive_config(stark_shifts=table_shifts)
    protocol = zeno.GateProtocol(
        initial=zeno.plus_plus_state(), drives=drives, params=spec.device,
        sample_times=(drives.resolved_gate_time(),), n_fock=n_fock,
    )
    return zeno.run_gate_trajectory(protocol, seed)


def _eps_point(args):
    spec, eps, coherence, table_shifts = args
    table = calib.StarkTable(
        (0.0, eps), {k: {0.0: 0.0, eps: v} for k, v in table_shifts.items()}
    )
    params = spec.device if coherence == "finite" else spec.device.without_decoherence()
    return zeno.epsilon_sweep(params, spec.drives["rabi_mhz"], (eps,), coherence,
                              n_fock=spec.sim["fock_dim"], stark_table=table,
                              symmetric_on=spec.drives["symmetric_on"],
                              dt_us=spec.dt_us())[0]


def _stark_point(args):
    spec, eps, coherence, window = args
    params = spec.device if coherence == "finite" else spec.device.without_decoherence()
    table = calib.build_stark_table(
        params, (eps,),
        drives_template=DriveConfig(symmetric_on=spec.drives["symmetric_on"]),
        duration_us=window,
    )
    return eps, {k: table.shifts[k][eps] for k in ("g1e1", "g2e2", "ef")}


def _ramsey_point(args):
    spec, eps, pair, symmetric_on = args
    drives = DriveConfig(rabi_freq=0.0, zeno_amp=eps, symmetric_on=symmetric_on)
    window = 1.0 / spec.drives["rabi_mhz"] if spec.drives["rabi_mhz"] > 0 else 1.0
    r = calib.simulated_ramsey(spec.device, drives, pair, duration_us=window)
    return {"eps_mhz": eps, "pair": f"{pair[0]}-{pair[1]}",
            "symmetric_on": symmetric_on, "shift_mhz": r.shift_mhz,
            "residual_rad": r.fit_residual_rad}


def _stark_table_for(spec: ExperimentSpec, eps_list, coherence: str, jobs: int) -> calib.StarkTable:
    window = 1.0 / spec.drives["rabi_mhz"]
    results = _pmap(_stark_point, [(spec, float(e), coherence, window) for e in eps_list], jobs)
    shifts = {k: {0.0: 0.0} for k in ("g1e1", "g2e2", "ef")}
    for eps, per in results:
        for k, v in per.items():
            shifts[k][eps] = v
    return calib.StarkTable(tuple(sorted({0.0, *map(float, eps_list)})), shifts)


# ----------------------------------------------------------------------------
# subcommands


def _run_block_sweep(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    eps_list = spec.protocol["eps_list_mhz"]
    rabis = list(spec.protocol["rabi_list_mhz"])
    points = []
    for rabi in rabis:
        for model in ("full-cavity", "ideal-markovian"):
            for eps in eps_list:
                points.append((spec, float(rabi), float(eps), model))
    rows_raw = _pmap(_block_point, points, jobs)
    rows = [(r["rabi_mhz"], r["eps_mhz"], r["model"], r["p_gg"]) for r in rows_raw]
    res = SweepResult("block-sweep", ("rabi_mhz", "eps_mhz", "model", "p_gg"),
                      rows, spec.spec_hash, spec.sim["seed"])
    res.write_csv(out / "block_sweep.csv")
    res.write_meta(out / "block_sweep.json")
    return [res]


def _run_gate_evolve(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    eps = spec.drives["zeno_amp_mhz"]
    table = _stark_table_for(spec, [eps], spec.protocol["coherence"], jobs)
    drives = spec.drive_config(stark_shifts=table.drive_shifts(eps))
    gate_time = drives.resolved_gate_time()
    stride = spec.sim["sample_stride_ns"] * 1e-3
    n = max(1, int(round(gate_time / stride)))
    samples = tuple(np.linspace(0.0, gate_time, n + 1)[1:])
    params = (spec.device if spec.protocol["coherence"] == "finite"
              else spec.device.without_decoherence())
    protocol = zeno.GateProtocol(initial=zeno.plus_plus_state(), drives=drives,
                                 params=params, sample_times=samples,
                                 n_fock=spec.sim["fock_dim"])
    states = zeno.run_gate(protocol)

    m_rows, g_rows = [], []
    target = metrics.plus_plus_target()
    for t, st in zip(samples, states):
        rho = st.data
        for i, ri in enumerate(_COMP_LABELS):
            for j, cj in enumerate(_COMP_LABELS):
                m_rows.append((t, ri, cj, rho[i, j].real, rho[i, j].imag))
        comp = metrics.computational_projection(rho)
        g_rows.append((
            t,
            comp.subspace_weight * metrics.state_fidelity(comp.matrix, target),
            metrics.concurrence(comp.matrix),
            comp.subspace_weight,
            float(rho[5, 5].real),
            float(np.angle(rho[2, 0])),
        ))
    res_m = SweepResult("gate-evolve", ("time_us", "row", "col", "re", "im"),
                        m_rows, spec.spec_hash, spec.sim["seed"])
    res_g = SweepResult("gate-evolve",
                        ("time_us", "fidelity", "concurrence", "subspace_weight",
                         "p_fe", "phase_eg_gg_rad"),
                        g_rows, spec.spec_hash, spec.sim["seed"],
                        extra_metadata={"stark_shifts_mhz": table.drive_shifts(eps)})
    res_m.write_csv(out / "gate_evolve_matrix.csv")
    res_g.write_csv(out / "gate_evolve_metrics.csv")
    res_g.write_meta(out / "gate_evolve.json")
    return [res_m, res_g]


def _run_eps_sweep(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    eps_list = [float(e) for e in spec.protocol["eps_list_mhz"]]
    coherence = spec.protocol["coherence"]
    table = _stark_table_for(spec, eps_list, coherence, jobs)
    points = [(spec, eps, coherence, table.drive_shifts(eps)) for eps in eps_list]
    rows_raw = _pmap(_eps_point, points, jobs)
    rows = [(r["rabi_mhz"], r["eps_mhz"], r["coherence"], r["fidelity"],
             r["concurrence"], r["subspace_weight"], r["p_fe"]) for r in rows_raw]
    res = SweepResult("eps-sweep",
                      ("rabi_mhz", "eps_mhz", "coherence", "fidelity", "concurrence",
                       "subspace_weight", "p_fe"),
                      rows, spec.spec_hash, spec.sim["seed"])
    res.write_csv(out / "eps_sweep.csv")
    res.write_meta(out / "eps_sweep.json")
    return [res]


def _run_bound_table(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    rabi = spec.drives["rabi_mhz"]
    rows = []
    for ratio in spec.protocol["ratios"]:
        ratio = float(ratio)
        gamma = TWO_PI * rabi / ratio
        problem = zeno.build_ideal_zeno_problem(rabi, gamma)
        chan_a = bounds.channel_from_problem(problem, t=1.0 / rabi)
        u = zeno.ideal_gate_unitary(rabi).matrix
        p_diag = np.ones(6)
        p_diag[5] = 0.0
        chan_b = bounds.compose(bounds.unitary_channel(u), bounds.pinching_channel(p_diag))
        lower = bounds.numeric_lower_estimate(chan_a, chan_b, seed=spec.sim["seed"])
        rows.append((ratio, bounds.gate_bound(ratio), bounds.loosened_bound(ratio), lower))
    res = SweepResult("bound-table", ("ratio", "analytic", "loosened", "lower_estimate"),
                      rows, spec.spec_hash, spec.sim["seed"])
    res.write_csv(out / "bound_table.csv")
    res.write_meta(out / "bound_table.json")
    return [res]


def _run_tomo_roundtrip(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    obs = tomo.build_observable_set()
    rng = np.random.Generator(np.random.Philox(key=np.uint64(spec.sim["seed"])))
    rows = []
    for k in range(spec.protocol["n_states"]):
        x = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        rho = x @ x.conj().T
        rho /= np.real(np.trace(rho))
        data = tomo.simulate_tomography(rho, obs)
        rec = tomo.mle_reconstruct(data, obs)
        rows.append((f"exact_{k}", metrics.trace_distance(rec.data, rho), 1.0))
        scaled = tomo.TomogramData(obs.labels, 0.8 * data.expectations)
        rec08 = tomo.mle_reconstruct(scaled, obs)
        target = 0.8 * rho + 0.2 * np.eye(6) / 6.0
        rows.append((f"scaled08_{k}", metrics.trace_distance(rec08.data, target), 1.0))
        shots = spec.protocol["shots"] or 10000
        psi = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        psi /= np.linalg.norm(psi)
        noisy = tomo.simulate_tomography(np.outer(psi, psi.conj()), obs, shots=shots,
                                         seed=spec.sim["seed"] + k)
        rec_n = tomo.mle_reconstruct(noisy, obs)
        rows.append((f"shots_{k}", metrics.trace_distance(rec_n.data, np.outer(psi, psi.conj())),
                     metrics.state_fidelity(rec_n.data, psi)))
    res = SweepResult("tomo-roundtrip", ("case", "trace_distance", "fidelity"),
                      rows, spec.spec_hash, spec.sim["seed"])
    res.write_csv(out / "tomo_roundtrip.csv")
    res.write_meta(out / "tomo_roundtrip.json")
    return [res]


def _trajectories(spec: ExperimentSpec, jobs: int):
    eps = spec.drives["zeno_amp_mhz"]
    table = _stark_table_for(spec, [eps], spec.protocol["coherence"], jobs)
    shifts = table.drive_shifts(eps)
    n_fock = spec.sim["fock_dim"]
    seeds = [spec.sim["seed"] + k for k in range(spec.protocol["n_traj"])]
    records = _pmap(_gate_trajectory_point,
                    [(spec, shifts, s, n_fock) for s in seeds], jobs)
    return records


def _run_trajectories(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    records = _trajectories(spec, jobs)
    det = spec.protocol["detection_fidelity"]
    rows = []
    for rec in records:
        flagged = escape_detector(rec, det, seed=spec.sim["seed"])
        rows.append((rec.seed, int(rec.escaped), int(flagged), len(rec.jump_log),
                     rec.max_flagged_population))
    res = SweepResult("trajectories",
                      ("seed", "escaped", "flagged", "n_jumps", "max_p_fe"),
                      rows, spec.spec_hash, spec.sim["seed"],
                      extra_metadata={
                          "escape_fraction": sum(r.escaped for r in records) / len(records),
                          "detection_fidelity": det,
                      })
    res.write_csv(out / "trajectories.csv")
    res.write_meta(out / "trajectories.json")
    return [res]


def _run_postselect(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    records = _trajectories(spec, jobs)
    target = metrics.plus_plus_target()
    rows = []
    for det in (1.0, spec.protocol["detection_fidelity"]):
        flags = [escape_detector(r, det, seed=spec.sim["seed"]) for r in records]
        for row in tomo.postselect_analysis(records, flags, target,
                                            spec.protocol["fractions"]):
            rows.append((row["fraction"], det, row["n_kept"], row["fidelity"],
                         row["concurrence"]))
    res = SweepResult("postselect",
                      ("fraction", "detection_fidelity", "n_kept", "fidelity", "concurrence"),
                      rows, spec.spec_hash, spec.sim["seed"])
    res.write_csv(out / "postselect.csv")
    res.write_meta(out / "postselect.json")
    return [res]


def _run_calibrate(spec: ExperimentSpec, out: Path, jobs: int) -> list[SweepResult]:
    eps_list = [float(e) for e in spec.protocol["eps_list_mhz"]]
    table = _stark_table_for(spec, eps_list, spec.protocol["coherence"], jobs)
    table.to_json(out / "stark_table.json")
    points = []
    for eps in eps_list:
        for pair in (("gg", "eg"), ("ge", "ee")):
            for sym in (True, False):
                points.append((spec, eps, pair, sym))
    rows_raw = _pmap(_ramsey_point, points, jobs)
    rows = [(r["eps_mhz"], r["pair"], r["symmetric_on"], r["shift_mhz"], r["residual_rad"])
            for r in rows_raw]
    res = SweepResult("calibrate",
                      ("eps_mhz", "pair", "symmetric_on", "shift_mhz", "residual_rad"),
                      rows, spec.spec_hash, spec.sim["seed"],
                      extra_metadata={"stark_table": "stark_table.json"})
    res.write_csv(out / "calibrate.csv")
    res.write_meta(out / "calibrate.json")
    return [res]


_RUNNERS = {
    "block-sweep": _run_block_sweep,
    "gate-evolve": _run_gate_evolve,
    "eps-sweep": _run_eps_sweep,
    "bound-table": _run_bound_table,
    "tomo-roundtrip": _run_tomo_roundtrip,
    "postselect": _run_postselect,
    "calibrate": _run_calibrate,
    "trajectories": _run_trajectories,
}


def run_subcommand(name: str, spec: ExperimentSpec, out_dir, jobs: int | None = None):
    """Dispatch one experiment; returns the SweepResults it wrote."""
    if name not in _RUNNERS:
        raise SpecError(f"unknown subcommand {name!r}; choose from {PROTOCOLS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[name](spec, out, jobs if jobs is not None else spec.sim["jobs"])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenosim",
        description="Measurement-induced entangling-gate simulations: "
                    "deterministic sweep outputs per experiment spec.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PROTOCOLS:
        p = sub.add_parser(name)
        p.add_argument("--spec", type=str, default=None, help="experiment spec (YAML)")
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override sim.seed")
        p.add_argument("--jobs", type=int, default=None, help="parallel sweep workers")
        p.add_argument("--fock", type=int, default=None, help="override sim.fock_dim")
        p.add_argument("--dt", type=float, default=None, help="override sim.dt_ns (ns)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = parse_spec(args.spec)
        sim = dict(spec.sim)
        if args.seed is not None:
            sim["seed"] = args.seed
        if args.fock is not None:
            if args.fock < 2:
                raise SpecError("--fock must be at least 2")
            sim["fock_dim"] = args.fock
        if args.dt is not None:
            if args.dt <= 0:
                raise SpecError("--dt must be positive (ns)")
            sim["dt_ns"] = args.dt
        spec = spec.with_sim(sim)
        run_subcommand(args.command, spec, args.out, jobs=args.jobs)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
