"""No-U-Turn sampler with multinomial trajectory sampling.

Trajectories grow by doubling in a random direction until the generalised
no-U-turn criterion fails on the whole trajectory or on any subtree, or the
maximum depth is reached.  Samples are drawn across the trajectory in
proportion to ``exp(-H)``, biased towards the newest subtree at the top
level.  Step size is tuned by dual averaging; a diagonal inverse metric is
estimated from two tuning windows.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import AllDivergent, MlayoutError, NonFiniteStart
from .trace import SamplerConfig, Trace, chain_rng

log = logging.getLogger(__name__)

MAX_DELTA_H = 1000.0


class DualAveraging:
    """Nesterov dual averaging on the log step size."""

    def __init__(self, eps0: float, target: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.restart(eps0)

    def restart(self, eps0: float) -> None:
        self.mu = math.log(10.0 * eps0)
        self.counter = 0
        self.s_bar = 0.0
        self.x_bar = 0.0

    def update(self, accept_stat: float) -> float:
        stat = min(max(accept_stat, 0.0), 1.0)
        self.counter += 1
        eta = 1.0 / (self.counter + self.t0)
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - stat)
        x = self.mu - self.s_bar * math.sqrt(self.counter) / self.gamma
        w = self.counter ** -self.kappa
        self.x_bar = (1.0 - w) * self.x_bar + w * x
        return math.exp(x)

    @property
    def final(self) -> float:
        return math.exp(self.x_bar)


def regularized_variance(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    var = samples.var(axis=0, ddof=1) if n > 1 else np.ones(samples.shape[1])
    return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def adaptation_windows(tune: int) -> tuple[int, int, int]:
    """Iteration indices: start collecting, first metric update, final update."""
    return int(0.15 * tune), int(0.5 * tune), int(0.9 * tune)


class _State:
    __slots__ = ("theta", "p", "logp", "grad")

    def __init__(self, theta, p, logp, grad):
        self.theta, self.p, self.logp, self.grad = theta, p, logp, grad


class _Tree:
    """Bookkeeping for one transition."""

    def __init__(self, sampler: "NUTS", H0: float):
        self.s = sampler
        self.H0 = H0
        self.n_leapfrog = 0
        self.sum_metro = 0.0
        self.divergent = False

    def build(self, depth, z: _State, sign):
        """Extend from ``z`` by ``2**depth`` steps.

        Returns ``(valid, z_end, z_propose, log_sum_weight, rho,
        p_sharp_beg, p_sharp_end, p_beg, p_end)``.
        """
        s = self.s
        if depth == 0:
            z = s.leapfrog(z, sign * s.eps)
            self.n_leapfrog += 1
            h = s.hamiltonian(z) if z is not None else math.inf
            if not math.isfinite(h):
                h = math.inf
            if h - self.H0 > MAX_DELTA_H:
                self.divergent = True
            dH = self.H0 - h
            self.sum_metro += 1.0 if dH > 0 else math.exp(dH)
            if self.divergent:
                return (False, z, z, -math.inf, None, None, None, None, None)
            ps = s.inv_metric * z.p
            return (True, z, z, dH, z.p.copy(), ps, ps, z.p, z.p)

        init = self.build(depth - 1, z, sign)
        if not init[0]:
            return init
        _, z_mid, prop_init, lsw_init, rho_init, ps_beg, ps_init_end, p_beg, p_init_end = init
        final = self.build(depth - 1, z_mid, sign)
        if not final[0]:
            return final
        _, z_end, prop_final, lsw_final, rho_final, ps_final_beg, ps_end, p_final_beg, p_end = final

        lsw = np.logaddexp(lsw_init, lsw_final)
        if lsw_final > lsw or s.rng.uniform() < math.exp(lsw_final - lsw):
            prop = prop_final
        else:
            prop = prop_init
        rho = rho_init + rho_final
        persist = (_criterion(ps_beg, ps_end, rho)
                   and _criterion(ps_beg, ps_final_beg, rho_init + p_final_beg)
                   and _criterion(ps_init_end, ps_end, rho_final + p_init_end))
        return (persist, z_end, prop, lsw, rho, ps_beg, ps_end, p_beg, p_end)


def _criterion(p_sharp_minus, p_sharp_plus, rho) -> bool:
    return float(p_sharp_plus @ rho) > 0.0 and float(p_sharp_minus @ rho) > 0.0


class NUTS:
    """One chain of the no-U-turn sampler over ``density``.

    ``density(theta)`` must return ``(logp, grad)`` on the unconstrained scale.
    """

    def __init__(self, density, dim: int, rng: np.random.Generator, max_treedepth=10):
        self.density = density
        self.dim = dim
        self.rng = rng
        self.max_treedepth = max_treedepth
        self.inv_metric = np.ones(dim)
        self.eps = 1.0

    # -- dynamics ----------------------------------------------------------
    def evaluate(self, theta):
        try:
            logp, grad = self.density(theta)
        except (MlayoutError, FloatingPointError, OverflowError):
            return None
        if not (math.isfinite(logp) and np.all(np.isfinite(grad))):
            return None
        return logp, grad

    def leapfrog(self, z: _State, eps: float) -> _State | None:
        p = z.p + 0.5 * eps * z.grad
        theta = z.theta + eps * self.inv_metric * p
        if not np.all(np.isfinite(theta)):
            return None
        res = self.evaluate(theta)
        if res is None:
            return None
        logp, grad = res
        return _State(theta, p + 0.5 * eps * grad, logp, grad)

    def hamiltonian(self, z: _State) -> float:
        return -z.logp + 0.5 * float(np.dot(z.p * self.inv_metric, z.p))

    def draw_momentum(self) -> np.ndarray:
        return self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)

    def find_reasonable_epsilon(self, z: _State) -> None:
        """Double or halve the step until one-step acceptance crosses 0.8."""
        log_target = math.log(0.8)
        direction = 0
        for _ in range(100):
            p = self.draw_momentum()
            z0 = _State(z.theta, p, z.logp, z.grad)
            H0 = self.hamiltonian(z0)
            z1 = self.leapfrog(z0, self.eps)
            dH = H0 - self.hamiltonian(z1) if z1 is not None else -math.inf
            if not math.isfinite(dH):
                dH = -math.inf
            if direction == 0:
                direction = 1 if dH > log_target else -1
            if direction == 1 and not dH > log_target:
                break
            if direction == -1 and not dH < log_target:
                break
            self.eps = self.eps * 2.0 if direction == 1 else self.eps / 2.0
            if self.eps > 1e7 or self.eps < 1e-10:
                break

    # -- one transition ----------------------------------------------------
    def transition(self, z: _State):
        p0 = self.draw_momentum()
        z = _State(z.theta, p0, z.logp, z.grad)
        tree = _Tree(self, self.hamiltonian(z))
        z_fwd = z_bck = z
        ps_fwd_bck = ps_fwd_fwd = ps_bck_fwd = ps_bck_bck = self.inv_metric * p0
        p_fwd_bck = p_fwd_fwd = p_bck_fwd = p_bck_bck = p0
        rho = p0.copy()
        log_sum_weight = 0.0
        sample = z
        depth = 0
        while depth < self.max_treedepth:
            if self.rng.uniform() > 0.5:
                rho_bck = rho
                p_bck_fwd, ps_bck_fwd = p_fwd_bck, ps_fwd_bck
                res = tree.build(depth, z_fwd, 1.0)
                valid = res[0]
                if valid:
                    _, z_fwd, prop, lsw_sub, rho_fwd, ps_fwd_bck, ps_fwd_fwd, p_fwd_bck, p_fwd_fwd = res
            else:
                rho_fwd = rho
                p_fwd_bck, ps_fwd_bck = p_bck_fwd, ps_bck_fwd
                res = tree.build(depth, z_bck, -1.0)
                valid = res[0]
                if valid:
                    _, z_bck, prop, lsw_sub, rho_bck, ps_bck_fwd, ps_bck_bck, p_bck_fwd, p_bck_bck = res
            if not valid:
                break
            depth += 1
            if lsw_sub > log_sum_weight or self.rng.uniform() < math.exp(lsw_sub - log_sum_weight):
                sample = prop
            log_sum_weight = float(np.logaddexp(log_sum_weight, lsw_sub))
            rho = rho_bck + rho_fwd
            persist = (_criterion(ps_bck_bck, ps_fwd_fwd, rho)
                       and _criterion(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck)
                       and _criterion(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd))
            if not persist:
                break
        accept = tree.sum_metro / max(tree.n_leapfrog, 1)
        return sample, accept, depth, tree.divergent, tree.n_leapfrog


def initial_point(density, dim, rng, prior_sampler=None, unconstrain=None, attempts=100):
    """Unconstrained image of a prior draw, jittered by ``U(-1, 1)``."""
    for _ in range(attempts):
        if prior_sampler is not None:
            theta = np.asarray(unconstrain(prior_sampler(rng)), dtype=float)
        else:
            theta = np.zeros(dim)
        theta = theta + rng.uniform(-1.0, 1.0, size=dim)
        if not np.all(np.isfinite(theta)):
            continue
        try:
            logp, grad = density(theta)
        except MlayoutError:
            continue
        if math.isfinite(logp) and np.all(np.isfinite(grad)):
            return theta, logp, grad
    raise NonFiniteStart(f"no finite starting point after {attempts} attempts")


def run_chain(density, dim, config: SamplerConfig, chain: int, *, prior_sampler=None,
              unconstrain=None, constrain=None):
    rng = chain_rng(config.seed, chain)
    theta, logp, grad = initial_point(density, dim, rng, prior_sampler, unconstrain)
    nuts = NUTS(density, dim, rng, config.max_treedepth)
    z = _State(theta, np.zeros(dim), logp, grad)
    nuts.find_reasonable_epsilon(z)
    da = DualAveraging(nuts.eps, config.target_accept)
    start, first, second = adaptation_windows(config.tune)
    window: list[np.ndarray] = []

    for it in range(config.tune):
        z, accept, _, _, _ = nuts.transition(z)
        nuts.eps = da.update(accept)
        if start <= it < second:
            window.append(z.theta)
        if it + 1 in (first, second) and len(window) >= 10:
            nuts.inv_metric = regularized_variance(np.array(window))
            window = []
            nuts.find_reasonable_epsilon(z)
            da.restart(nuts.eps)
    nuts.eps = da.final

    draws = np.empty((config.draws, dim))
    accept_stat = np.empty(config.draws)
    depths = np.empty(config.draws, dtype=np.int64)
    divergent = np.zeros(config.draws, dtype=bool)
    for i in range(config.draws):
        z, accept, depth, div, _ = nuts.transition(z)
        draws[i] = z.theta
        accept_stat[i], depths[i], divergent[i] = accept, depth, div
    if constrain is not None:
        draws = constrain(draws)
    return draws, divergent, depths, accept_stat, nuts.eps


def sample(density, config: SamplerConfig | None = None, *, names=None, dim=None,
           prior_sampler=None, unconstrain=None, constrain=None, layout_name=None) -> Trace:
    """Run ``config.chains`` independent NUTS chains.

    When ``density`` is a :class:`~mlayout.density.DensityFn` the prior
    sampler, transforms and parameter names are taken from it.
    """
    config = config or SamplerConfig()
    if hasattr(density, "priors"):
        names = names or list(density.names)
        prior_sampler = prior_sampler or density.sample_prior
        unconstrain = unconstrain or density.unconstrain
        constrain = constrain or density.constrain
        layout_name = layout_name or density.layout.name
    dim = dim or len(names)
    names = names or [f"x{j}" for j in range(dim)]
    out = [run_chain(density, dim, config, c, prior_sampler=prior_sampler,
                     unconstrain=unconstrain, constrain=constrain)
           for c in range(config.chains)]
    trace = Trace(
        names=list(names),
        draws=np.stack([o[0] for o in out]),
        divergent=np.stack([o[1] for o in out]),
        tree_depth=np.stack([o[2] for o in out]),
        accept_stat=np.stack([o[3] for o in out]),
        step_size=np.array([o[4] for o in out]),
        algorithm="nuts",
        layout_name=layout_name,
    )
    if trace.divergent.all():
        raise AllDivergent("every post-tuning trajectory diverged")
    hits = int((trace.tree_depth >= config.max_treedepth).sum())
    if hits:
        msg = f"{hits} of {trace.divergent.size} transitions hit max_treedepth={config.max_treedepth}"
        trace.warnings.append(msg)
        log.warning(msg)
    if trace.divergence_count:
        trace.warnings.append(f"{trace.divergence_count} divergent transitions after tuning")
    return trace
