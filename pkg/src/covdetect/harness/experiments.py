"""Seeded Monte-Carlo campaigns behind the command-line subcommands."""

import hashlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import __version__
from .._rng import ROLE_SAMPLER, ROLE_SEQUENCES, ROLE_SIGNAL, ROLE_SOLVER, ROLE_SUPPORT, make_rng
from ..embed import gen_embed_ground_truth, joint_error_counts, lift_sequences, select_blocks
from ..errordist import equal_error_rate, error_distribution, predict_roc, roc_activity, roc_joint
from ..model import sample_covariance, simulate
from ..phase import EMPIRICAL_SOLVER, empirical_transition, phase_sweep
from ..solvers import SolverConfig, coordinate_descent_mle, coordinate_descent_regularized, nnls
from .output import ResultRecord


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def solver_config_from(cfg, seed=None):
    return SolverConfig(
        max_sweeps=cfg.max_sweeps,
        tol=cfg.tol,
        regularizer=cfg.regularizer,
        lam=cfg.lam,
        eps=cfg.eps,
        seed=0 if seed is None else seed,
    )


def solve(arm, S, cov, noise_var, M, config):
    """Run one estimator arm: ``'mle'`` (honours ``config.regularizer``) or ``'nnls'``."""
    if arm == "nnls":
        return nnls(S, cov, noise_var, config)
    if arm != "mle":
        raise ValueError(f"unknown arm {arm!r}")
    if config.regularizer != "none":
        return coordinate_descent_regularized(S, cov, noise_var, config, M)
    return coordinate_descent_mle(S, cov, noise_var, config)


def trial_covariance(S, gamma0, M, noise_var, seed, *key):
    """Sample covariance of one simulated block, drawn from stream ``key + (ROLE_SIGNAL,)``."""
    Y = simulate(S, gamma0, M, noise_var, make_rng(seed, *key, ROLE_SIGNAL))
    return sample_covariance(Y).sigma


def simulate_estimates(S, gamma0, noise_var, M, trials, seed, arm="mle", solver_config=None, key=(), n_jobs=1):
    """Estimates from ``trials`` independent received blocks for fixed ``S`` and ``gamma0``.

    Trial ``t`` uses the signal stream ``(seed, *key, t)`` and its own
    coordinate-permutation stream, so results do not depend on ``n_jobs``.

    Returns
    -------
    ndarray of shape (trials, N)
    """
    base = solver_config or SolverConfig()

    def one(t):
        cov = trial_covariance(S, gamma0, M, noise_var, seed, *key, t)
        cfg = SolverConfig(**{**base.__dict__, "seed": np.random.SeedSequence(seed, spawn_key=(*key, t, ROLE_SOLVER))})
        return solve(arm, S, cov, noise_var, M, cfg).gamma_hat

    return np.vstack(_map(one, range(trials), n_jobs))


def _instance(cfg, *key):
    Q = 2 ** cfg.b
    S = lift_sequences(cfg.kind, cfg.L, cfg.N, Q, make_rng(cfg.seed, *key, ROLE_SEQUENCES)).entries
    truth = gen_embed_ground_truth(cfg.N, cfg.K, Q, cfg.gamma_active, make_rng(cfg.seed, *key, ROLE_SUPPORT))
    return S, truth


def _roc_rows(curve):
    return [{"l_th": float(t), "pfa": float(a), "pmd": float(m)} for t, a, m in zip(curve.thresholds, curve.pfa, curve.pmd)]


def _thresholds(cfg):
    return np.linspace(0.0, cfg.threshold_max, cfg.n_thresholds)


def _curve(values, truth, thresholds):
    if truth.Q == 1:
        return roc_activity(values, truth.gamma_tilde, thresholds)
    return roc_joint(values, truth.symbols, truth.Q, thresholds)


def run_phase(cfg):
    grid = phase_sweep(cfg.N, cfg.L_list, cfg.K_list, cfg.trials, cfg.method, cfg.seed, cfg.kind, 2 ** cfg.b,
                       n_jobs=cfg.threads)
    tables = {"phase": grid.rows()}
    if cfg.overlay_empirical:
        # the noiseless runs need a convergence-level stop; never loosen it
        scfg = solver_config_from(cfg)
        scfg.tol = min(scfg.tol, EMPIRICAL_SOLVER["tol"])
        scfg.max_sweeps = max(scfg.max_sweeps, EMPIRICAL_SOLVER["max_sweeps"])
        emp = empirical_transition(cfg.N, cfg.L_list, cfg.K_list, cfg.trials, scfg, cfg.seed,
                                   cfg.kind, 2 ** cfg.b, n_jobs=cfg.threads)
        tables["empirical"] = emp.rows()
    return tables, {}


def run_roc(cfg):
    S, truth = _instance(cfg)
    lifted = truth.lifted
    errs = error_distribution(S, lifted, cfg.noise_for(), cfg.M, cfg.n_samples, make_rng(cfg.seed, ROLE_SAMPLER),
                              verify_condition=False)
    thr = _thresholds(cfg)
    mode = "activity_only" if truth.Q == 1 else "joint_data"
    predicted = predict_roc(errs, truth, thr, mode)
    tables = {"predicted": _roc_rows(predicted)}
    if cfg.trials:
        est = simulate_estimates(S, truth.gamma_tilde, cfg.noise_for(), cfg.M, cfg.trials, cfg.seed, "mle",
                                 solver_config_from(cfg), key=(1,), n_jobs=cfg.threads)
        tables["simulated"] = _roc_rows(_curve(est, truth, thr))
    return tables, {}


def run_error_dist(cfg):
    S, truth = _instance(cfg)
    lifted = truth.lifted
    errs = error_distribution(S, lifted, cfg.noise_for(), cfg.M, cfg.n_samples, make_rng(cfg.seed, ROLE_SAMPLER),
                              verify_condition=False)
    sources = {"predicted": errs.samples}
    if cfg.trials:
        est = simulate_estimates(S, truth.gamma_tilde, cfg.noise_for(), cfg.M, cfg.trials, cfg.seed, "mle",
                                 solver_config_from(cfg), key=(1,), n_jobs=cfg.threads)
        sources["simulated"] = est - truth.gamma_tilde
    I, Ic = lifted.inactive_set, lifted.active_set
    density, summary = [], []
    for source, samples in sources.items():
        for cls, idx in (("active", Ic), ("inactive", I)):
            vals = samples[:, idx].ravel()
            if not vals.size:
                continue
            edges = np.histogram_bin_edges(vals, bins="fd")
            dens, edges = np.histogram(vals, bins=edges, density=True)
            density.extend(
                {"source": source, "class": cls, "bin_left": float(a), "bin_right": float(b), "density": float(d)}
                for a, b, d in zip(edges[:-1], edges[1:], dens)
            )
            summary.append(
                {
                    "source": source,
                    "class": cls,
                    "n_values": int(vals.size),
                    "mean": float(vals.mean()),
                    "std": float(vals.std()),
                    "zero_mass": float(np.mean(np.abs(vals) <= 1e-12)),
                }
            )
    return {"density": density, "summary": summary}, {}


def compare(cfg):
    """Matched-instance comparison of estimator arms by equal-error probability.

    For each ``L`` every trial draws one instance and one sample covariance,
    which all arms then share. Per arm the estimates are pooled into one
    detection curve and the probability where PFA = PMD is reported.
    """
    rows = []
    digests = {arm: [] for arm in cfg.arms}
    base = solver_config_from(cfg)
    for L in cfg.L_list:
        sub = cfg.__class__(**{**cfg.to_dict(), "L": L})

        def one(t):
            S, truth = _instance(sub, L, t)
            noise_var = cfg.noise_for(L)
            cov = trial_covariance(S, truth.gamma_tilde, cfg.M, noise_var, cfg.seed, L, t)
            digest = hashlib.sha256(np.ascontiguousarray(cov).tobytes()).hexdigest()
            out = {}
            for arm in cfg.arms:
                scfg = SolverConfig(**{**base.__dict__, "seed": np.random.SeedSequence(cfg.seed, spawn_key=(L, t, ROLE_SOLVER))})
                out[arm] = solve(arm, S, cov, noise_var, cfg.M, scfg).gamma_hat
            return truth, digest, out

        results = _map(one, range(cfg.trials), cfg.threads)
        for arm in cfg.arms:
            digests[arm].extend(d for _, d, _ in results)
            curve = pooled_curve([o[arm] for _, _, o in results], [tr for tr, _, _ in results])
            rate, thr = equal_error_rate(curve)
            rows.append({"L": int(L), "arm": arm, "error_probability": rate, "threshold": thr, "n_trials": cfg.trials})
    return {"compare": rows}, {"cov_digests": digests}


def pooled_curve(values, truths, thresholds=None):
    """One detection curve from estimates of several instances.

    Works on the lifted vectors; with ``Q = 1`` it is the activity-only curve.
    """
    Q = truths[0].Q
    vals = np.concatenate([np.asarray(v).reshape(-1, Q) for v in values]).ravel()[None, :]
    symbols = np.concatenate([tr.symbols for tr in truths])
    return roc_joint(vals, symbols, Q, thresholds)


def run_joint(cfg):
    Q = 2 ** cfg.b
    base = solver_config_from(cfg)

    def one(t):
        S, truth = _instance(cfg, t)
        noise_var = cfg.noise_for()
        cov = trial_covariance(S, truth.gamma_tilde, cfg.M, noise_var, cfg.seed, t)
        scfg = SolverConfig(**{**base.__dict__, "seed": np.random.SeedSequence(cfg.seed, spawn_key=(t, ROLE_SOLVER))})
        return truth, solve("mle", S, cov, noise_var, cfg.M, scfg).gamma_hat

    results = _map(one, range(cfg.trials), cfg.threads)
    totals = {"missed": 0, "wrong_bits": 0, "false_alarm": 0, "n_active": 0, "n_inactive": 0}
    for truth, gamma_hat in results:
        counts = joint_error_counts(select_blocks(gamma_hat, Q, cfg.l_th), truth)
        for k in totals:
            totals[k] += counts[k]
    summary = {"l_th": cfg.l_th, **totals}
    summary["pmd"] = totals["missed"] / totals["n_active"] if totals["n_active"] else 0.0
    summary["pfa"] = totals["false_alarm"] / totals["n_inactive"] if totals["n_inactive"] else 0.0
    curve = pooled_curve([g for _, g in results], [tr for tr, _ in results], _thresholds(cfg))
    return {"counts": [summary], "roc": _roc_rows(curve)}, {}


RUNNERS = {
    "phase": run_phase,
    "phase-embed": run_phase,
    "roc": run_roc,
    "error-dist": run_error_dist,
    "compare-nnls": compare,
    "joint": run_joint,
}


def run(cfg):
    """Dispatch ``cfg.experiment`` and wrap the tables in a :class:`ResultRecord`."""
    runner = RUNNERS[cfg.experiment]
    tables, extra = runner(cfg)
    return ResultRecord(cfg.experiment, cfg.to_dict(), __version__, tables, extra)
