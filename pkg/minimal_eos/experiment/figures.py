"""figures module: line plots for each preset layout"""

import math

import numpy as np

from minimal_eos.analysis import decay_reference, gfs_bounds
from minimal_eos.constrained import constrained_start, simulate_constrained
from minimal_eos.dynamics import gf_integrate, gf_paths, gf_step_size, gfs_analytic, gfs_interval
from minimal_eos.errors import NotConvergedError
from minimal_eos.model import loss
from minimal_eos.svg import LinePlot

FIGURE4_LAUNCHES = 5


def base_figures(traj):
    """loss on a log scale and sharpness against the 2 / eta threshold"""
    cfg = traj.config
    t = traj.column("t")
    loss_plot = LinePlot("loss", y_label="L", log_y=True).add_series("L", t, traj.column("loss"))
    sharpness = (
        LinePlot("sharpness", y_label="S")
        .add_series("S", t, traj.column("sharpness"))
        .hline("2/eta", 2.0 / cfg.eta)
    )
    return {"loss": loss_plot, "sharpness": sharpness}


def decay_figures(traj):
    """L, L2 and the scaled surrogate with the constrained decay slope, then L1 against L2"""
    cfg = traj.config
    t = traj.column("t").astype(np.float64)
    scaled = cfg.lambda2 * traj.column("lhat")
    rho = decay_reference(cfg).constrained
    reference = scaled[0] * rho**t
    decay = (
        LinePlot("loss decay", y_label="loss", log_y=True)
        .add_series("L", t, traj.column("loss"))
        .add_series("L2", t, traj.column("l2"))
        .add_series("lambda2 lhat", t, scaled)
        .add_series("slope 2 log(1 - 2 lambda2 / lambda1)", t, reference, color="#d62728", dashed=True)
    )
    split = (
        LinePlot("loss components", y_label="loss", log_y=True)
        .add_series("L1", t, traj.column("l1"))
        .add_series("L2", t, traj.column("l2"))
    )
    return {"decay": decay, "split": split}


def gfs_figures(traj):
    """phi with its bounds; the beta1 free bracket is drawn on the steps where alpha <= beta2"""
    cfg = traj.config
    t = traj.column("t")
    phi = [gfs_analytic(cfg, r.params).phi for r in traj.records]
    bounds = [gfs_bounds(cfg, r.params) for r in traj.records]
    intervals = [gfs_interval(cfg, r.params) or (math.nan, math.nan) for r in traj.records]
    plot = (
        LinePlot("gradient flow solution sharpness", y_label="phi")
        .add_series("lower bound", t, [b.lower for b in bounds], dashed=True)
        .add_series("phi", t, phi)
        .add_series("upper bound", t, [b.upper for b in bounds], dashed=True)
        .add_series("interval lower", t, [i[0] for i in intervals], color="#2ca02c", dashed=True)
        .add_series("interval upper", t, [i[1] for i in intervals], color="#2ca02c", dashed=True)
        .hline("2/eta", 2.0 / cfg.eta)
    )
    return {"gfs": plot}



def gf_path_figures(traj, run_config):
    """gradient flow paths launched from points along the descent path, in the (beta2, alpha) plane"""
    cfg = traj.config
    launches = np.linspace(0, len(traj) - 1, FIGURE4_LAUNCHES).astype(int)
    points = [traj[int(i)].params for i in launches]
    paths = gf_paths(
        cfg,
        points,
        grad_tol=run_config.grad_tol,
        max_steps=run_config.max_gf_steps,
        sample_every=max(run_config.gf_sample_every, 1),
    )
    plot = LinePlot("gradient flow from the descent path", x_label="beta2", y_label="alpha")
    plot.add_series("GD", traj.column("beta2"), traj.column("alpha"))
    for i, path in zip(launches, paths):
        b2 = [s.params.beta2 for s in path.samples]
        a = [s.params.alpha for s in path.samples]
        plot.add_series(f"GF from t={i}", b2, a, dashed=True)
    b2_all = np.concatenate([traj.column("beta2")] + [[s.params.beta2 for s in p.samples] for p in paths])
    grid = np.linspace(max(float(b2_all.min()), 1e-3), float(b2_all.max()), 200)
    plot.add_series("alpha beta2 = 1", grid, 1.0 / grid, color="#555555", dashed=True)
    return {"gf_paths": plot}


def comparison_figures(traj, run_config):
    """gradient descent, gradient flow and the constrained trajectory from one initialization"""
    cfg = traj.config
    p0 = traj[0].params
    steps = len(traj) - 1
    t = traj.column("t").astype(np.float64)
    start = constrained_start(cfg, p0, run_config.product_bound)
    run = simulate_constrained(cfg, start, steps, run_config.product_bound)
    constrained_alpha = [s.alpha for s in run.states]
    constrained_loss = run.losses(cfg)
    # gradient flow time eta * t matches descent step t
    sample_every = max(1, int(round(cfg.eta / gf_step_size(cfg))))
    horizon = int(math.ceil(steps * cfg.eta / gf_step_size(cfg)))
    flow = _flow_over(cfg, p0, horizon, sample_every, run_config.grad_tol)
    flow_t = [s.time / cfg.eta for s in flow.samples]
    flow_alpha = [s.params.alpha for s in flow.samples]
    flow_loss = [loss(cfg, s.params) for s in flow.samples]
    alpha_plot = (
        LinePlot("alpha", y_label="alpha")
        .add_series("GD", t, traj.column("alpha"))
        .add_series("GF", flow_t, flow_alpha)
        .add_series("constrained", np.arange(len(run.states)), constrained_alpha)
        .hline("sqrt(2 / (lambda1 eta))", cfg.clip_alpha)
    )
    loss_plot = (
        LinePlot("loss", y_label="L", log_y=True)
        .add_series("GD", t, traj.column("loss"))
        .add_series("GF", flow_t, flow_loss)
        .add_series("constrained", np.arange(len(run.states)), constrained_loss)
    )
    return {"compare_alpha": alpha_plot, "compare_loss": loss_plot}


def _flow_over(cfg, p0, horizon, sample_every, grad_tol):
    try:
        return gf_integrate(cfg, p0, grad_tol=grad_tol, max_steps=horizon, sample_every=sample_every)
    except NotConvergedError as e:
        # the flow is only drawn over the descent horizon
        return e.partial


def trajectory_figures(traj, run_config):
    """plots of a descent run, the preset selects the extra layout"""
    figures = base_figures(traj)
    preset = run_config.preset
    if preset in ("figure2", "figure7"):
        figures.update(decay_figures(traj))
    elif preset == "figure3":
        figures.update(gfs_figures(traj))
    elif preset == "figure4":
        figures.update(gf_path_figures(traj, run_config))
    elif preset == "figure5":
        figures.update(comparison_figures(traj, run_config))
    return figures


def gf_figures(cfg, result):
    time = [s.time for s in result.samples]
    loss_plot = LinePlot("gradient flow loss", x_label="time", y_label="L", log_y=True).add_series(
        "L", time, [loss(cfg, s.params) for s in result.samples]
    )
    phi = gfs_analytic(cfg, result.samples[0].params).phi
    alpha_plot = (
        LinePlot("gradient flow alpha^2", x_label="time", y_label="alpha^2")
        .add_series("alpha^2", time, [s.params.alpha**2 for s in result.samples])
        .hline("phi / lambda1", phi / cfg.lambda1)
    )
    return {"gf_loss": loss_plot, "gf_alpha": alpha_plot}


def constrained_figures(cfg, run):
    t = np.arange(len(run.states))
    loss_plot = LinePlot("constrained loss", y_label="L", log_y=True).add_series("L", t, run.losses(cfg))
    alpha_plot = (
        LinePlot("constrained alpha", y_label="alpha")
        .add_series("alpha", t, [s.alpha for s in run.states])
        .hline("sqrt(2 / (lambda1 eta))", cfg.clip_alpha)
    )
    return {"constrained_loss": loss_plot, "constrained_alpha": alpha_plot}
