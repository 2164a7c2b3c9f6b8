"""Compiled planar rigid-body kernels.

Rotation convention: R(phi) maps a body-frame vector (x, z) to
(c*x + s*z, -s*x + c*z), so positive angles tip the body's up axis toward +x.
With that convention d/dt (R r) = w * (r_z, -r_x) and the velocity-product
acceleration of a rotating offset is -w**2 * r.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from horizon_bench.sim.model import HINGE, ModelSpec

# float parameter slots
F_GRAVITY, F_DT, F_KN, F_CN, F_MU, F_VS, F_BOX_HW, F_BOX_HH, F_BOX_MU, F_BOX_MASS, F_HAND_K, F_HAND_C, F_LIM_K, F_LIM_C, F_BOUND = range(15)
# int parameter slots
I_NSUB, I_BOX_DOF = range(2)

OK = -1  # status code for a finite rollout


class Kernel(NamedTuple):
    body_parent: np.ndarray
    body_pos: np.ndarray
    body_mass: np.ndarray
    body_inertia: np.ndarray
    body_com: np.ndarray
    body_jstart: np.ndarray
    body_jcount: np.ndarray
    ancestor: np.ndarray  # ancestor[a, b] true when body a is b or an ancestor of b
    joint_type: np.ndarray  # 0 slide, 1 hinge
    joint_axis: np.ndarray
    dof_body: np.ndarray
    damping: np.ndarray
    armature: np.ndarray
    act_dof: np.ndarray
    act_limit: np.ndarray
    site_body: np.ndarray
    site_pos: np.ndarray
    contact_site: np.ndarray
    hand_site: np.ndarray
    com_body: np.ndarray
    body_dofs: np.ndarray  # (nb, nq) dofs moving each body, -1 padded
    body_ndof: np.ndarray
    body_hinge: np.ndarray  # (nb, nq) 1.0 where body_dofs entry is a hinge
    range_lo: np.ndarray  # soft joint ranges, +-inf when unlimited
    range_hi: np.ndarray
    fparams: np.ndarray
    iparams: np.ndarray


def build_kernel(model: ModelSpec) -> Kernel:
    nb = len(model.bodies)
    parent = np.array([b.parent for b in model.bodies], dtype=np.int64)
    ancestor = np.zeros((nb, nb), dtype=np.bool_)
    for b in range(nb):
        a = b
        while a >= 0:
            ancestor[a, b] = True
            a = parent[a]
    jstart, jcount, jtype, jaxis, dof_body = [], [], [], [], []
    for i, b in enumerate(model.bodies):
        jstart.append(len(jtype))
        jcount.append(len(b.joints))
        for j in b.joints:
            jtype.append(1 if j.kind == HINGE else 0)
            norm = float(np.hypot(*j.axis)) or 1.0
            jaxis.append((j.axis[0] / norm, j.axis[1] / norm))
            dof_body.append(i)
    names = model.joint_names
    box = model.box
    fparams = np.zeros(15)
    fparams[F_LIM_K] = model.limit_stiffness
    fparams[F_LIM_C] = model.limit_damping
    fparams[F_BOUND] = model.divergence_bound
    fparams[F_GRAVITY] = model.gravity
    fparams[F_DT] = model.physics_dt
    fparams[F_KN] = model.contact.stiffness
    fparams[F_CN] = model.contact.damping
    fparams[F_MU] = model.contact.friction
    fparams[F_VS] = model.contact.smoothing_velocity
    if box is not None:
        fparams[F_BOX_HW] = box.half_width
        fparams[F_BOX_HH] = box.half_height
        fparams[F_BOX_MU] = box.friction
        fparams[F_BOX_MASS] = box.mass
        fparams[F_HAND_K] = box.hand_stiffness
        fparams[F_HAND_C] = box.hand_damping
    nq = len(dof_body)
    body_dofs = -np.ones((nb, nq), dtype=np.int64)
    body_hinge = np.zeros((nb, nq))
    body_ndof = np.zeros(nb, dtype=np.int64)
    for b in range(nb):
        cnt = 0
        for j in range(nq):
            if ancestor[dof_body[j], b]:
                body_dofs[b, cnt] = j
                body_hinge[b, cnt] = float(jtype[j] == 1)
                cnt += 1
        body_ndof[b] = cnt
    iparams = np.array([model.substeps, -1 if model.box_dof is None else model.box_dof], dtype=np.int64)
    return Kernel(
        body_parent=parent,
        body_pos=np.array([b.pos for b in model.bodies], dtype=float).reshape(nb, 2),
        body_mass=np.array([b.mass for b in model.bodies], dtype=float),
        body_inertia=np.array([b.inertia for b in model.bodies], dtype=float),
        body_com=np.array([b.com for b in model.bodies], dtype=float).reshape(nb, 2),
        body_jstart=np.array(jstart, dtype=np.int64),
        body_jcount=np.array(jcount, dtype=np.int64),
        ancestor=ancestor,
        joint_type=np.array(jtype, dtype=np.int64),
        joint_axis=np.array(jaxis, dtype=float).reshape(-1, 2),
        dof_body=np.array(dof_body, dtype=np.int64),
        damping=np.array([model.joint_damping.get(n, 0.0) for n in names], dtype=float),
        armature=np.array([model.armature.get(n, 0.0) for n in names], dtype=float),
        act_dof=np.array([model.joint_index(a.joint) for a in model.actuators], dtype=np.int64),
        act_limit=np.array([a.limit for a in model.actuators], dtype=float),
        site_body=np.array([s.body for s in model.sites], dtype=np.int64),
        site_pos=np.array([s.pos for s in model.sites], dtype=float).reshape(-1, 2),
        contact_site=np.array([model.site_index(n) for n in model.contact_sites], dtype=np.int64),
        hand_site=np.array([model.site_index(n) for n in model.hand_sites], dtype=np.int64),
        com_body=np.array(model.com_bodies, dtype=np.int64),
        body_dofs=body_dofs,
        body_ndof=body_ndof,
        body_hinge=body_hinge,
        range_lo=np.array([model.joint_ranges.get(n, (-np.inf, np.inf))[0] for n in names], dtype=float),
        range_hi=np.array([model.joint_ranges.get(n, (-np.inf, np.inf))[1] for n in names], dtype=float),
        fparams=fparams,
        iparams=iparams,
    )


@njit(cache=True, error_model="numpy")
def _fk(k, q, v):
    """Body frames, their velocities and velocity-product accelerations,
    plus per-dof hinge anchors and slide directions in world coordinates."""
    nb = k.body_parent.shape[0]
    n = q.shape[0]
    o = np.zeros((nb, 2))
    phi = np.zeros(nb)
    od = np.zeros((nb, 2))
    om = np.zeros(nb)
    ab = np.zeros((nb, 2))
    anchor = np.zeros((n, 2))
    sdir = np.zeros((n, 2))
    for b in range(nb):
        p = k.body_parent[b]
        if p >= 0:
            po0, po1, pphi, pod0, pod1, pom, pab0, pab1 = o[p, 0], o[p, 1], phi[p], od[p, 0], od[p, 1], om[p], ab[p, 0], ab[p, 1]
        else:
            po0 = po1 = pphi = pod0 = pod1 = pom = pab0 = pab1 = 0.0
        c = np.cos(pphi)
        s = np.sin(pphi)
        lx = k.body_pos[b, 0]
        lz = k.body_pos[b, 1]
        r0 = c * lx + s * lz
        r1 = -s * lx + c * lz
        x0 = po0 + r0
        x1 = po1 + r1
        v0 = pod0 + pom * r1
        v1 = pod1 - pom * r0
        a0 = pab0 - pom * pom * r0
        a1 = pab1 - pom * pom * r1
        ang = pphi
        w = pom
        for jj in range(k.body_jcount[b]):
            j = k.body_jstart[b] + jj
            if k.joint_type[j] == 1:
                anchor[j, 0] = x0
                anchor[j, 1] = x1
                ang += q[j]
                w += v[j]
            else:
                c = np.cos(ang)
                s = np.sin(ang)
                ax = k.joint_axis[j, 0]
                az = k.joint_axis[j, 1]
                d0 = c * ax + s * az
                d1 = -s * ax + c * az
                sdir[j, 0] = d0
                sdir[j, 1] = d1
                a0 += -w * w * d0 * q[j] + 2.0 * w * d1 * v[j]
                a1 += -w * w * d1 * q[j] - 2.0 * w * d0 * v[j]
                v0 += w * d1 * q[j] + d0 * v[j]
                v1 += -w * d0 * q[j] + d1 * v[j]
                x0 += d0 * q[j]
                x1 += d1 * q[j]
        o[b, 0] = x0
        o[b, 1] = x1
        phi[b] = ang
        od[b, 0] = v0
        od[b, 1] = v1
        om[b] = w
        ab[b, 0] = a0
        ab[b, 1] = a1
    return o, phi, od, om, ab, anchor, sdir


@njit(cache=True, error_model="numpy")
def _point(b, lx, lz, o, phi, od, om, ab):
    c = np.cos(phi[b])
    s = np.sin(phi[b])
    r0 = c * lx + s * lz
    r1 = -s * lx + c * lz
    w = om[b]
    return (
        o[b, 0] + r0,
        o[b, 1] + r1,
        od[b, 0] + w * r1,
        od[b, 1] - w * r0,
        ab[b, 0] - w * w * r0,
        ab[b, 1] - w * w * r1,
    )


@njit(cache=True, error_model="numpy")
def _jac(k, b, p0, p1, anchor, sdir, J):
    """Point Jacobian restricted to the dofs that move body b (columns follow k.body_dofs[b])."""
    for c in range(k.body_ndof[b]):
        j = k.body_dofs[b, c]
        if k.joint_type[j] == 1:
            J[0, c] = p1 - anchor[j, 1]
            J[1, c] = anchor[j, 0] - p0
        else:
            J[0, c] = sdir[j, 0]
            J[1, c] = sdir[j, 1]


@njit(cache=True, error_model="numpy")
def _clamp_controls(k, u):
    out = np.empty_like(u)
    for a in range(u.shape[0]):
        lim = k.act_limit[a]
        x = u[a]
        out[a] = -lim if x < -lim else (lim if x > lim else x)
    return out


@njit(cache=True, error_model="numpy")
def _forces(k, q, v, u):
    """Mass matrix, generalized force and the velocity Jacobian of the
    velocity-dependent forces (negative semidefinite, applied implicitly)."""
    n = q.shape[0]
    nb = k.body_parent.shape[0]
    g = k.fparams[F_GRAVITY]
    o, phi, od, om, ab, anchor, sdir = _fk(k, q, v)
    M = np.zeros((n, n))
    f = np.zeros(n)
    D = np.zeros((n, n))
    J = np.zeros((2, n))
    for b in range(nb):
        m = k.body_mass[b]
        inertia = k.body_inertia[b]
        nd = k.body_ndof[b]
        p0, p1, _, _, pa0, pa1 = _point(b, k.body_com[b, 0], k.body_com[b, 1], o, phi, od, om, ab)
        _jac(k, b, p0, p1, anchor, sdir, J)
        fx = -m * pa0
        fz = -m * g - m * pa1
        for ci in range(nd):
            i = k.body_dofs[b, ci]
            f[i] += fx * J[0, ci] + fz * J[1, ci]
            hi = inertia * k.body_hinge[b, ci]
            for cj in range(ci, nd):
                j = k.body_dofs[b, cj]
                val = m * (J[0, ci] * J[0, cj] + J[1, ci] * J[1, cj]) + hi * k.body_hinge[b, cj]
                M[i, j] += val
                if j != i:
                    M[j, i] += val
    lk = k.fparams[F_LIM_K]
    lc = k.fparams[F_LIM_C]
    for i in range(n):
        M[i, i] += k.armature[i]
        f[i] -= k.damping[i] * v[i]
        D[i, i] -= k.damping[i]
        viol = 0.0
        if q[i] < k.range_lo[i]:
            viol = k.range_lo[i] - q[i]
        elif q[i] > k.range_hi[i]:
            viol = k.range_hi[i] - q[i]
        if viol != 0.0:
            f[i] += lk * viol - lc * v[i]
            D[i, i] -= lc
    uc = _clamp_controls(k, u)
    for a in range(uc.shape[0]):
        f[k.act_dof[a]] += uc[a]

    kn = k.fparams[F_KN]
    cn = k.fparams[F_CN]
    mu = k.fparams[F_MU]
    vs = k.fparams[F_VS]
    for ci in range(k.contact_site.shape[0]):
        si = k.contact_site[ci]
        b = k.site_body[si]
        p0, p1, v0, v1, _, _ = _point(b, k.site_pos[si, 0], k.site_pos[si, 1], o, phi, od, om, ab)
        pen = -p1
        if pen <= 0.0:
            continue
        fn = kn * pen - cn * v1
        if fn <= 0.0:
            continue
        th = np.tanh(v0 / vs)
        ft = -mu * fn * th
        dft = mu * fn * (1.0 - th * th) / vs
        _jac(k, b, p0, p1, anchor, sdir, J)
        nd = k.body_ndof[b]
        for c1 in range(nd):
            i = k.body_dofs[b, c1]
            f[i] += J[0, c1] * ft + J[1, c1] * fn
            for c2 in range(nd):
                j = k.body_dofs[b, c2]
                D[i, j] -= cn * J[1, c1] * J[1, c2] + dft * J[0, c1] * J[0, c2]

    bd = k.iparams[I_BOX_DOF]
    if bd >= 0:
        fb = k.fparams[F_BOX_MU] * k.fparams[F_BOX_MASS] * g
        thb = np.tanh(v[bd] / vs)
        f[bd] -= fb * thb
        D[bd, bd] -= fb * (1.0 - thb * thb) / vs
        hw = k.fparams[F_BOX_HW]
        top = 2.0 * k.fparams[F_BOX_HH]
        hk = k.fparams[F_HAND_K]
        hc = k.fparams[F_HAND_C]
        jr = np.zeros(n)
        for hi in range(k.hand_site.shape[0]):
            si = k.hand_site[hi]
            b = k.site_body[si]
            p0, p1, v0, v1, _, _ = _point(b, k.site_pos[si, 0], k.site_pos[si, 1], o, phi, od, om, ab)
            pen = p0 - (q[bd] - hw)
            if pen <= 0.0 or pen >= 2.0 * hw or p1 < 0.0 or p1 > top:
                continue
            fh = hk * pen + hc * (v0 - v[bd])
            if fh <= 0.0:
                continue
            _jac(k, b, p0, p1, anchor, sdir, J)
            jr[:] = 0.0
            for c1 in range(k.body_ndof[b]):
                jr[k.body_dofs[b, c1]] = J[0, c1]
            jr[bd] -= 1.0
            for i in range(n):
                f[i] -= fh * jr[i]
                for j in range(n):
                    D[i, j] -= hc * jr[i] * jr[j]
    return M, f, D


@njit(cache=True, error_model="numpy")
def _solve_spd(A, b):
    """Cholesky solve; A is symmetric positive definite."""
    n = b.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for p in range(j):
            s -= L[j, p] * L[j, p]
        if s <= 0.0:
            return np.full(n, np.nan)
        d = np.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, n):
            s = A[i, j]
            for p in range(j):
                s -= L[i, p] * L[j, p]
            L[i, j] = s / d
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for p in range(i):
            s -= L[i, p] * y[p]
        y[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for p in range(i + 1, n):
            s -= L[p, i] * x[p]
        x[i] = s / L[i, i]
    return x


@njit(cache=True, error_model="numpy")
def _substep(k, q, v, u):
    h = k.fparams[F_DT]
    M, f, D = _forces(k, q, v, u)
    dv = _solve_spd(M - h * D, h * f)
    v2 = v + dv
    q2 = q + h * v2
    return q2, v2


@njit(cache=True, error_model="numpy")
def _finite(x, bound):
    """False for non-finite entries or runaway magnitudes."""
    for i in range(x.shape[0]):
        if not np.abs(x[i]) <= bound:
            return False
    return True


@njit(cache=True, error_model="numpy")
def step_one(k, q, v, u):
    """One control step. Returns (q, v, status); status is OK or the index of
    the first substep whose result was not finite."""
    nsub = k.iparams[I_NSUB]
    for i in range(nsub):
        q, v = _substep(k, q, v, u)
        bound = k.fparams[F_BOUND]
        if not (_finite(q, bound) and _finite(v, bound)):
            return q, v, i
    return q, v, OK


@njit(cache=True, error_model="numpy")
def step_batch(k, Q, V, U):
    B = Q.shape[0]
    Qn = np.empty_like(Q)
    Vn = np.empty_like(V)
    status = np.empty(B, dtype=np.int64)
    for i in range(B):
        q, v, st = step_one(k, Q[i].copy(), V[i].copy(), U[i])
        Qn[i] = q
        Vn[i] = v
        status[i] = st
    return Qn, Vn, status


@njit(cache=True, error_model="numpy")
def rollout_batch(k, q0, v0, U):
    """Open-loop rollouts from one start state; U has shape (N, T, nu).
    status[i] is OK or the control step at which candidate i diverged."""
    N, T, _ = U.shape
    n = q0.shape[0]
    Qs = np.full((N, T + 1, n), np.nan)
    Vs = np.full((N, T + 1, n), np.nan)
    status = np.full(N, OK, dtype=np.int64)
    for i in range(N):
        q = q0.copy()
        v = v0.copy()
        Qs[i, 0] = q
        Vs[i, 0] = v
        for t in range(T):
            q, v, st = step_one(k, q, v, U[i, t])
            if st != OK:
                status[i] = t
                break
            Qs[i, t + 1] = q
            Vs[i, t + 1] = v
    return Qs, Vs, status


@njit(cache=True, error_model="numpy")
def rollout_feedback(k, x0, Unom, Xnom, kff, K, alphas):
    """Closed-loop rollouts u = clamp(unom + alpha*kff + K (x - xnom)) for each alpha."""
    A = alphas.shape[0]
    T, nu = Unom.shape
    nx = x0.shape[0]
    n = nx // 2
    X = np.full((A, T + 1, nx), np.nan)
    Uo = np.full((A, T, nu), np.nan)
    status = np.full(A, OK, dtype=np.int64)
    for a in range(A):
        x = x0.copy()
        X[a, 0] = x
        for t in range(T):
            u = Unom[t] + alphas[a] * kff[t] + K[t] @ (x - Xnom[t])
            u = _clamp_controls(k, u)
            Uo[a, t] = u
            q, v, st = step_one(k, x[:n].copy(), x[n:].copy(), u)
            if st != OK:
                status[a] = t
                break
            x = np.concatenate((q, v))
            X[a, t + 1] = x
    return X, Uo, status


@njit(cache=True, error_model="numpy")
def sites_batch(k, Q, V, sites):
    B = Q.shape[0]
    S = sites.shape[0]
    P = np.empty((B, S, 2))
    Pd = np.empty((B, S, 2))
    for i in range(B):
        o, phi, od, om, ab, _, _ = _fk(k, Q[i], V[i])
        for j in range(S):
            si = sites[j]
            b = k.site_body[si]
            p0, p1, v0, v1, _, _ = _point(b, k.site_pos[si, 0], k.site_pos[si, 1], o, phi, od, om, ab)
            P[i, j, 0] = p0
            P[i, j, 1] = p1
            Pd[i, j, 0] = v0
            Pd[i, j, 1] = v1
    return P, Pd


@njit(cache=True, error_model="numpy")
def com_batch(k, Q, V):
    B = Q.shape[0]
    C = np.zeros((B, 2))
    Cd = np.zeros((B, 2))
    total = 0.0
    for b in k.com_body:
        total += k.body_mass[b]
    for i in range(B):
        o, phi, od, om, ab, _, _ = _fk(k, Q[i], V[i])
        for b in k.com_body:
            m = k.body_mass[b]
            p0, p1, v0, v1, _, _ = _point(b, k.body_com[b, 0], k.body_com[b, 1], o, phi, od, om, ab)
            C[i, 0] += m * p0
            C[i, 1] += m * p1
            Cd[i, 0] += m * v0
            Cd[i, 1] += m * v1
        C[i] /= total
        Cd[i] /= total
    return C, Cd


@njit(cache=True, error_model="numpy")
def mass_matrix(k, q):
    M, _, _ = _forces(k, q, np.zeros_like(q), np.zeros(k.act_limit.shape[0]))
    return M


@njit(cache=True, error_model="numpy")
def energy(k, q, v):
    """Kinetic (including rotor armature) plus gravitational potential energy."""
    M = mass_matrix(k, q)
    ke = 0.5 * v @ (M @ v)
    o, phi, od, om, ab, _, _ = _fk(k, q, v)
    pe = 0.0
    g = k.fparams[F_GRAVITY]
    for b in range(k.body_parent.shape[0]):
        _, p1, _, _, _, _ = _point(b, k.body_com[b, 0], k.body_com[b, 1], o, phi, od, om, ab)
        pe += k.body_mass[b] * g * p1
    return ke + pe


@njit(cache=True, error_model="numpy")
def contact_normals(k, q, v):
    """Normal force magnitude at each ground contact site."""
    o, phi, od, om, ab, _, _ = _fk(k, q, v)
    out = np.zeros(k.contact_site.shape[0])
    for ci in range(k.contact_site.shape[0]):
        si = k.contact_site[ci]
        b = k.site_body[si]
        _, p1, _, v1, _, _ = _point(b, k.site_pos[si, 0], k.site_pos[si, 1], o, phi, od, om, ab)
        pen = -p1
        if pen > 0.0:
            fn = k.fparams[F_KN] * pen - k.fparams[F_CN] * v1
            out[ci] = fn if fn > 0.0 else 0.0
    return out


@njit(cache=True, error_model="numpy")
def site_jacobian(k, q, site):
    n = q.shape[0]
    o, phi, od, om, ab, anchor, sdir = _fk(k, q, np.zeros(n))
    b = k.site_body[site]
    p0, p1, _, _, _, _ = _point(b, k.site_pos[site, 0], k.site_pos[site, 1], o, phi, od, om, ab)
    Jc = np.zeros((2, n))
    _jac(k, b, p0, p1, anchor, sdir, Jc)
    J = np.zeros((2, n))
    for c in range(k.body_ndof[b]):
        J[:, k.body_dofs[b, c]] = Jc[:, c]
    return J
