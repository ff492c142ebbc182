"""Method of Moving Asymptotes for problems of the form

    min f0(x)  s.t.  f_i(x) <= 0,  xmin <= x <= xmax,

following Svanberg's scheme: separable convex approximations with moving
asymptotes, and a primal-dual interior-point solve of each subproblem with
artificial variables (a0 = 1, a_i = 0, c_i = 1000, d_i = 1).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class MMAOptions:
    move: float = 0.2
    asyinit: float = 0.5
    asyincr: float = 1.2
    asydecr: float = 0.7
    albefa: float = 0.1
    asymin: float = 1e-4  # closest the asymptotes may approach x, in units of xmax - xmin
    asymax: float = 10.0
    raa0: float = 1e-5
    c: float = 1000.0
    # multiply c by max(1, |f0|) so the artificial variables stay expensive when the objective grows
    scale_c: bool = True
    d: float = 1.0
    epsimin: float = 1e-7
    max_conservative: int = 20


@dataclass
class MMAState:
    """Iteration memory: the two previous designs and the asymptotes."""

    n: int
    xmin: np.ndarray | float = 0.0
    xmax: np.ndarray | float = 1.0
    options: MMAOptions = field(default_factory=MMAOptions)
    iteration: int = 0
    xold1: np.ndarray | None = None
    xold2: np.ndarray | None = None
    low: np.ndarray | None = None
    upp: np.ndarray | None = None
    fallbacks: int = 0


@dataclass
class MMAStep:
    x: np.ndarray
    fallback: bool = False
    subproblem_iterations: int = 0


class _SubproblemFailure(RuntimeError):
    pass


# inner Newton loops that stall above the target are accepted, as in the
# reference scheme, unless the residual is still this large
_STALL_LIMIT = 1e-2


def _asymptotes(state: MMAState, x, xmin, xmax):
    o = state.options
    span = xmax - xmin
    if state.iteration <= 2 or state.low is None:
        return x - o.asyinit * span, x + o.asyinit * span
    sign = (x - state.xold1) * (state.xold1 - state.xold2)
    factor = np.ones_like(x)
    factor[sign > 0] = o.asyincr
    factor[sign < 0] = o.asydecr
    low = x - factor * (state.xold1 - state.low)
    upp = x + factor * (state.upp - state.xold1)
    low = np.clip(low, x - o.asymax * span, x - o.asymin * span)
    upp = np.clip(upp, x + o.asymin * span, x + o.asymax * span)
    return low, upp


def mma_update(state: MMAState, x, f0val: float, df0dx, fval, dfdx, constraints=None) -> MMAStep:
    """One MMA iteration; mutates ``state`` and returns the new design.

    ``fval`` (m,) and ``dfdx`` (m, n) hold the constraint values and gradients;
    m = 0 is allowed. ``constraints``, if given, evaluates the true constraint
    values at a trial design. It should be cheap: whenever a constraint
    exceeds its approximation at the subproblem solution, that approximation
    is made more convex and the subproblem solved again, so the returned
    design satisfies the constraints up to the subproblem's own slack. If the
    subproblem solve fails the step falls back to a clamped steepest-descent
    move and is flagged.
    """
    o = state.options
    x = np.asarray(x, dtype=float)
    n = x.size
    df0dx = np.asarray(df0dx, dtype=float).ravel()
    fval = np.atleast_1d(np.asarray(fval, dtype=float))
    dfdx = np.asarray(dfdx, dtype=float).reshape(fval.size, n)
    if fval.size == 0:  # inactive dummy constraint keeps the subproblem well posed
        fval, dfdx, constraints = np.array([-1.0]), np.zeros((1, n)), None
    m = fval.size
    xmin = np.broadcast_to(np.asarray(state.xmin, dtype=float), x.shape)
    xmax = np.broadcast_to(np.asarray(state.xmax, dtype=float), x.shape)
    state.iteration += 1

    low, upp = _asymptotes(state, x, xmin, xmax)
    span = xmax - xmin
    alfa = np.maximum.reduce([low + o.albefa * (x - low), x - o.move * span, xmin])
    beta = np.minimum.reduce([upp - o.albefa * (upp - x), x + o.move * span, xmax])

    inv_span = 1.0 / np.maximum(span, 1e-5)
    ux1, xl1 = upp - x, x - low
    ux2, xl2 = ux1 ** 2, xl1 ** 2
    p0 = np.maximum(df0dx, 0.0)
    q0 = np.maximum(-df0dx, 0.0)
    pq0 = 0.001 * (p0 + q0) + o.raa0 * inv_span
    p0 = (p0 + pq0) * ux2
    q0 = (q0 + pq0) * xl2
    Pg = np.maximum(dfdx, 0.0)
    Qg = np.maximum(-dfdx, 0.0)
    raa = np.full(m, o.raa0)
    c = np.full(m, o.c * (max(1.0, abs(float(f0val))) if o.scale_c else 1.0))

    fallback = False
    total = 0
    for attempt in range(o.max_conservative + 1):
        PQ = 0.001 * (Pg + Qg) + raa[:, None] * inv_span[None, :]
        P = (Pg + PQ) * ux2[None, :]
        Q = (Qg + PQ) * xl2[None, :]
        b = P @ (1.0 / ux1) + Q @ (1.0 / xl1) - fval
        try:
            xnew, iters = _subsolv(m, n, o.epsimin, low, upp, alfa, beta, p0, q0, P, Q,
                                   1.0, np.zeros(m), b, c, np.full(m, o.d))
        except (_SubproblemFailure, np.linalg.LinAlgError) as exc:
            log.warning("MMA subproblem failed (%s); taking a steepest-descent step", exc)
            scale = np.max(np.abs(df0dx))
            xnew = x if scale == 0 else x - o.move * span * df0dx / scale
            fallback = True
            state.fallbacks += 1
            break
        total += iters
        xnew = np.clip(xnew, alfa, beta)
        if constraints is None or attempt == o.max_conservative:
            break
        true = np.atleast_1d(np.asarray(constraints(xnew), dtype=float))
        approx = P @ (1.0 / (upp - xnew)) + Q @ (1.0 / (xnew - low)) - b
        excess = true - approx
        if np.all(excess <= 1e-12 * np.maximum(1.0, np.abs(true))):
            break
        dist = float(np.sum((upp - low) * (xnew - x) ** 2 / ((upp - xnew) * (xnew - low)) * inv_span))
        if dist <= 0:
            break
        raa = np.where(excess > 0, 1.1 * (raa + excess / dist), raa)

    state.xold2 = state.xold1 if state.xold1 is not None else x.copy()
    state.xold1 = x.copy()
    state.low, state.upp = low, upp
    return MMAStep(np.clip(xnew, alfa, beta), fallback, total)


def _subsolv(m, n, epsimin, low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d):
    """Primal-dual Newton solve of the MMA subproblem; returns (x, newton steps)."""
    een, eem = np.ones(n), np.ones(m)
    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = eem.copy()
    z = 1.0
    lam = eem.copy()
    xsi = np.maximum(een / (x - alfa), een)
    eta = np.maximum(een / (beta - x), een)
    mu = np.maximum(eem, 0.5 * c)
    zet = 1.0
    s = eem.copy()
    total = 0

    def residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi):
        ux1, xl1 = upp - x, x - low
        plam = p0 + P.T @ lam
        qlam = q0 + Q.T @ lam
        gvec = P @ (1 / ux1) + Q @ (1 / xl1)
        dpsidx = plam / ux1 ** 2 - qlam / xl1 ** 2
        return np.concatenate([
            dpsidx - xsi + eta,
            c + d * y - mu - lam,
            [a0 - zet - a @ lam],
            gvec - a * z - y + s - b,
            xsi * (x - alfa) - epsi,
            eta * (beta - x) - epsi,
            mu * y - epsi,
            [zet * z - epsi],
            lam * s - epsi,
        ])

    while epsi > epsimin:
        res = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
        resnorm, resmax = np.linalg.norm(res), np.max(np.abs(res))
        inner = 0
        while resmax > 0.9 * epsi and inner < 200:
            inner += 1
            total += 1
            ux1, xl1 = upp - x, x - low
            ux2, xl2 = ux1 ** 2, xl1 ** 2
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1 / ux1) + Q @ (1 / xl1)
            GG = P / ux2[None, :] - Q / xl2[None, :]
            dpsidx = plam / ux2 - qlam / xl2
            delx = dpsidx - epsi / (x - alfa) + epsi / (beta - x)
            dely = c + d * y - lam - epsi / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = 2 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1)) + xsi / (x - alfa) + eta / (beta - x)
            diagy = d + mu / y
            diaglamyi = s / lam + 1 / diagy
            if m < n:
                blam = dellam + dely / diagy - GG @ (delx / diagx)
                Alam = np.diag(diaglamyi) + (GG / diagx[None, :]) @ GG.T
                AA = np.block([[Alam, a[:, None]], [a[None, :], np.array([[-zet / z]])]])
                sol = np.linalg.solve(AA, np.concatenate([blam, [delz]]))
                dlam, dz = sol[:m], sol[m]
                dx = -delx / diagx - (GG.T @ dlam) / diagx
            else:
                dellamyi = dellam + dely / diagy
                Axx = np.diag(diagx) + (GG.T / diaglamyi[None, :]) @ GG
                azz = zet / z + a @ (a / diaglamyi)
                axz = -GG.T @ (a / diaglamyi)
                bx = delx + GG.T @ (dellamyi / diaglamyi)
                bz = delz - a @ (dellamyi / diaglamyi)
                AA = np.block([[Axx, axz[:, None]], [axz[None, :], np.array([[azz]])]])
                sol = np.linalg.solve(AA, -np.concatenate([bx, [bz]]))
                dx, dz = sol[:n], sol[n]
                dlam = (GG @ dx) / diaglamyi - dz * (a / diaglamyi) + dellamyi / diaglamyi
            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - xsi * dx / (x - alfa)
            deta = -eta + epsi / (beta - x) + eta * dx / (beta - x)
            dmu = -mu + epsi / y - mu * dy / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - s * dlam / lam

            xx = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dxx = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])
            stmxx = np.max(-1.01 * dxx / xx)
            stmalbe = max(np.max(-1.01 * dx / (x - alfa)), np.max(1.01 * dx / (beta - x)))
            step = 1.0 / max(stmalbe, stmxx, 1.0)

            old = (x, y, z, lam, xsi, eta, mu, zet, s)
            for _ in range(50):
                x = old[0] + step * dx
                y = old[1] + step * dy
                z = old[2] + step * dz
                lam = old[3] + step * dlam
                xsi = old[4] + step * dxsi
                eta = old[5] + step * deta
                mu = old[6] + step * dmu
                zet = old[7] + step * dzet
                s = old[8] + step * ds
                res = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
                newnorm = np.linalg.norm(res)
                if newnorm <= resnorm:
                    break
                step *= 0.5
            resnorm, resmax = newnorm, np.max(np.abs(res))
        if not np.isfinite(resmax) or (resmax > 0.9 * epsi and resmax > _STALL_LIMIT):
            raise _SubproblemFailure(f"no convergence at epsi={epsi:.1e} (residual {resmax:.2e})")
        epsi *= 0.1
    return x, total
