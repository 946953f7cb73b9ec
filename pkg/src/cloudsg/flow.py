"""Weakly compressible flow step in perturbation form.

The semi-discrete right-hand side is split into a linear part (acoustic and
gravity waves, linearized viscous fluxes) handled implicitly and a nonlinear
part (advection, remaining viscous terms, latent heating) handled
explicitly, advanced by the two-stage second-order IMEX scheme with
beta = 1 - 1/sqrt(2). The linear part is assembled once as a sparse matrix;
the implicit stages are solved by restarted GMRES with an incomplete-LU
preconditioner that is rebuilt only when the time step changes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from cloudsg import fv, thermo
from cloudsg.constants import PhysConsts
from cloudsg.grid import NGHOST, BoundarySpec, Grid, apply_boundary

IMEX_BETA = 1.0 - 1.0 / np.sqrt(2.0)
IMEX_DELTA = 1.0 - 1.0 / (2.0 * IMEX_BETA)


@dataclass
class FlowState:
    """Cell-averaged conserved perturbation variables."""

    rho_p: np.ndarray           # density perturbation
    rho_u: list                 # momentum components, one per axis
    rho_theta_p: np.ndarray     # (rho theta) perturbation

    def copy(self):
        return FlowState(self.rho_p.copy(), [m.copy() for m in self.rho_u],
                         self.rho_theta_p.copy())

    def to_vector(self):
        return np.concatenate([self.rho_p.ravel()]
                              + [m.ravel() for m in self.rho_u]
                              + [self.rho_theta_p.ravel()])

    @staticmethod
    def from_vector(vec, cells):
        n = int(np.prod(cells))
        dim = len(cells)
        parts = [vec[i * n:(i + 1) * n].reshape(cells) for i in range(dim + 2)]
        return FlowState(parts[0], parts[1:1 + dim], parts[-1])

    @staticmethod
    def zeros(grid: Grid):
        return FlowState(grid.zeros(), [grid.zeros() for _ in range(grid.dim)],
                         grid.zeros())

    def max_abs(self):
        comps = [self.rho_p] + self.rho_u + [self.rho_theta_p]
        return max(float(np.max(np.abs(c))) for c in comps)


class LinearSolveError(RuntimeError):
    pass


def linear_solve(operator, rhs, tol=1e-10, restart=40, maxiter=1000,
                 preconditioner=None, x0=None):
    """Solve operator x = rhs by preconditioned restarted GMRES.

    Raises LinearSolveError with the achieved residual if the relative
    residual does not reach tol within the iteration cap.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)
    x, info = spla.gmres(operator, rhs, x0=x0, rtol=tol, atol=0.0,
                         restart=restart, maxiter=maxiter, M=preconditioner)
    res = np.linalg.norm(operator @ x - rhs) / rhs_norm
    if res > 10.0 * tol:
        raise LinearSolveError(
            f"GMRES failed: relative residual {res:.3e} > tol {tol:.3e} "
            f"(info={info})")
    return x


def _d1_1d(n, h, rule):
    """Central first derivative with the ghost rule folded into the rows."""
    main = sp.diags([np.full(n - 1, -1.0), np.full(n - 1, 1.0)], [-1, 1],
                    shape=(n, n), format="lil")
    if rule == "periodic":
        main[0, n - 1] = -1.0
        main[n - 1, 0] = 1.0
    elif rule == "even":
        main[0, 0] += -1.0
        main[n - 1, n - 1] += 1.0
    elif rule == "odd":
        main[0, 0] += 1.0
        main[n - 1, n - 1] += -1.0
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return (main / (2.0 * h)).tocsr()


def _d2_1d(n, h, rule):
    """3-point second derivative with the ghost rule folded into the rows."""
    main = sp.diags([np.full(n - 1, 1.0), np.full(n, -2.0), np.full(n - 1, 1.0)],
                    [-1, 0, 1], shape=(n, n), format="lil")
    if rule == "periodic":
        main[0, n - 1] += 1.0
        main[n - 1, 0] += 1.0
    elif rule == "even":
        main[0, 0] += 1.0
        main[n - 1, n - 1] += 1.0
    elif rule == "odd":
        main[0, 0] += -1.0
        main[n - 1, n - 1] += -1.0
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return (main / (h * h)).tocsr()


def _lift(mat1d, axis, cells):
    """Kron-lift a 1-D operator to the full row-major cell ordering."""
    pre = int(np.prod(cells[:axis], dtype=int))
    post = int(np.prod(cells[axis + 1:], dtype=int))
    out = mat1d
    if pre > 1:
        out = sp.kron(sp.identity(pre), out)
    if post > 1:
        out = sp.kron(out, sp.identity(post))
    return out.tocsr()


class NSSolver:
    """Spatial operators and IMEX time stepping for the flow equations."""

    def __init__(self, grid: Grid, bc: BoundarySpec, theta_profile,
                 consts: PhysConsts = PhysConsts(), mu_m=1.0e-3, mu_h=1.0e-2,
                 gmres_tol=1e-10, gmres_restart=40, gmres_maxiter=1000,
                 ilu_drop_tol=1e-5, ilu_fill_factor=20.0):
        self.grid = grid
        self.bc = bc
        self.consts = consts
        self.mu_m = float(mu_m)
        self.mu_h = float(mu_h)
        self.gmres_tol = gmres_tol
        self.gmres_restart = gmres_restart
        self.gmres_maxiter = gmres_maxiter
        self.ilu_drop_tol = ilu_drop_tol
        self.ilu_fill_factor = ilu_fill_factor

        self._theta_profile = theta_profile
        self.background = thermo.hydrostatic_background(theta_profile, grid, consts)
        self._build_padded_background()
        self._check_dirichlet()
        self.pressure_coeff = thermo.pressure_coefficient(
            self.background.rho_theta_bar, consts)
        self._assemble_linear_operator()
        self._implicit_cache = {}

    # -- setup -------------------------------------------------------------

    def _build_padded_background(self):
        """Background fields on the ghost-extended grid, from the profile."""
        g = self.grid
        ng = NGHOST
        axes = [g.origin[a] + (np.arange(-ng, g.cells[a] + ng) + 0.5) * g.spacing[a]
                for a in range(g.dim)]
        coords = np.meshgrid(*axes, indexing="ij")
        x3 = coords[g.vertical_axis]
        prof = self._theta_profile
        if callable(prof):
            th = np.broadcast_to(prof(x3), x3.shape).astype(float)
        else:
            th = np.broadcast_to(np.asarray(prof, dtype=float), x3.shape).copy()
        c = self.consts
        pi_e = 1.0 - c.g * x3 / (c.c_p * th)
        gamma = c.gamma_dry
        rho = c.p0_eos / (c.R * th) * pi_e ** (1.0 / (gamma - 1.0))
        self.theta_bar_pad = th
        self.rho_bar_pad = rho
        self.rho_theta_bar_pad = rho * th

    def _theta_bar_at_face(self, axis, side):
        """Background theta on a boundary face (profile evaluated there)."""
        g = self.grid
        if axis != g.vertical_axis:
            raise ValueError("Dirichlet temperature only supported vertically")
        x3 = g.origin[axis] if side == "low" else g.origin[axis] + g.extent(axis)
        prof = self._theta_profile
        return float(prof(x3)) if callable(prof) else float(prof)

    def _check_dirichlet(self):
        """The implicit operator supports only homogeneous Dirichlet data,
        i.e. boundary temperatures equal to the background at the face."""
        for axis, (lo, hi) in self.bc.theta_dirichlet.items():
            for side, val in (("low", lo), ("high", hi)):
                tb = self._theta_bar_at_face(axis, side)
                if abs(val - tb) > 1e-10 * abs(tb):
                    raise ValueError(
                        "Dirichlet temperature must match the background "
                        f"profile at the face (axis {axis} {side}: "
                        f"{val} vs {tb})")

    def _axis_rule(self, var, axis):
        lo, hi = self.bc.rules(var)[axis]
        if isinstance(lo, tuple) or isinstance(hi, tuple):
            # Dirichlet temperature, verified homogeneous in perturbation
            # variables, folds to an odd reflection of (rho theta)'
            return "odd"
        if lo != hi:
            raise ValueError("asymmetric rules not supported in the matrix")
        return lo

    def _assemble_linear_operator(self):
        g = self.grid
        d = g.dim
        n = g.n_cells
        theta_diag = sp.diags(self.background.theta_bar.ravel())
        press_diag = sp.diags(self.pressure_coeff.ravel())

        d1 = {}   # (var, axis) -> lifted first derivative
        d2 = {}
        def D1(var, axis):
            key = (self._axis_rule(var, axis), axis)
            if ("d1", *key) not in d1:
                d1[("d1", *key)] = _lift(
                    _d1_1d(g.cells[axis], g.spacing[axis], key[0]), axis, g.cells)
            return d1[("d1", *key)]

        def D2(var, axis):
            key = (self._axis_rule(var, axis), axis)
            if ("d2", *key) not in d2:
                d2[("d2", *key)] = _lift(
                    _d2_1d(g.cells[axis], g.spacing[axis], key[0]), axis, g.cells)
            return d2[("d2", *key)]

        Z = sp.csr_matrix((n, n))
        blocks = [[None] * (d + 2) for _ in range(d + 2)]
        diff_blocks = [[None] * (d + 2) for _ in range(d + 2)]

        # continuity: -sum_s d/dx_s (rho u_s)
        for s in range(d):
            blocks[0][1 + s] = -D1(f"momentum{s}", s)

        # momentum rows
        for s in range(d):
            row = 1 + s
            # pressure gradient: -d/dx_s (c * rho_theta_p)
            blocks[row][d + 1] = -(D1("scalar", s) @ press_diag)
            # linear viscous fluxes: mu_m (Lap(rho u_s) + d_s div(rho u))
            visc = sum(D2(f"momentum{s}", r) for r in range(d)) * self.mu_m
            for r in range(d):
                term = self.mu_m * (D1("scalar", s) @ D1(f"momentum{r}", r))
                if r == s:
                    diff_blocks[row][1 + r] = visc + term
                else:
                    diff_blocks[row][1 + r] = term
            # gravity on the vertical component
            if s == g.vertical_axis:
                blocks[row][0] = -self.consts.g * sp.identity(n)

        # potential temperature row: -sum_s d/dx_s (theta_bar rho u_s)
        for s in range(d):
            blocks[d + 1][1 + s] = -(D1(f"momentum{s}", s) @ theta_diag)
        diff_blocks[d + 1][d + 1] = self.mu_h * sum(D2("theta", r) for r in range(d))

        def fill(bl):
            return [[c if c is not None else Z for c in row] for row in bl]

        self.linear_diffusion_matrix = sp.bmat(fill(diff_blocks), format="csr")
        adv = sp.bmat(fill(blocks), format="csr")
        self.linear_matrix = (adv + self.linear_diffusion_matrix).tocsr()

    # -- diagnostics -------------------------------------------------------

    def diagnose(self, flow: FlowState):
        """Total density, velocity components, theta and its perturbation."""
        rho = self.background.rho_bar + flow.rho_p
        if np.any(rho <= 0.0):
            raise FloatingPointError("total density became nonpositive")
        u = [m / rho for m in flow.rho_u]
        theta = (self.background.rho_theta_bar + flow.rho_theta_p) / rho
        theta_p = theta - self.background.theta_bar
        return rho, u, theta, theta_p

    def max_speed(self, flow: FlowState):
        _, u, _, _ = self.diagnose(flow)
        return max(float(np.max(np.abs(c))) for c in u)

    def cfl_dt(self, flow: FlowState, limit=0.5, dt_max=np.inf, safety=0.9):
        """Advective CFL step bound max|u_s| dt / h < limit, with safety."""
        umax = self.max_speed(flow)
        if umax <= 0.0:
            return dt_max
        return min(dt_max, safety * limit * self.grid.h_min / umax)

    # -- spatial operators -------------------------------------------------

    def eval_linear(self, flow: FlowState) -> FlowState:
        vec = self.linear_matrix @ flow.to_vector()
        return FlowState.from_vector(vec, self.grid.cells)

    def _pad_theta_p(self, theta_p):
        """Pad the primitive temperature perturbation; Dirichlet faces use
        the (homogeneous) face value of the perturbation."""
        rules = []
        for a, (lo, hi) in enumerate(self.bc.rules("theta")):
            def conv(rule, side):
                if isinstance(rule, tuple):
                    face = self._theta_bar_at_face(a, side)
                    return ("dirichlet", rule[1] - face)
                return rule
            rules.append((conv(lo, "low"), conv(hi, "high")))
        return apply_boundary(theta_p, rules)

    def eval_nonlinear(self, flow: FlowState, s_theta=None) -> FlowState:
        """Explicit tendency: MUSCL/Rusanov advection of the nonlinear flux,
        the nonlinear remainder of the diffusion, and the latent heating."""
        g = self.grid
        d = g.dim
        rho, u, theta, theta_p = self.diagnose(flow)

        rho_p_pad = apply_boundary(flow.rho_p, self.bc.rules("scalar"))
        rho_pad = self.rho_bar_pad + rho_p_pad
        theta_p_pad = self._pad_theta_p(theta_p)
        # conserved theta ghosts from the primitive rule and padded density
        rho_theta_p_pad = rho_pad * (self.theta_bar_pad + theta_p_pad) \
            - self.rho_theta_bar_pad
        padded = [rho_p_pad]
        padded += [apply_boundary(flow.rho_u[s], self.bc.rules(f"momentum{s}"))
                   for s in range(d)]
        padded.append(rho_theta_p_pad)

        tend = [np.zeros(g.cells) for _ in range(d + 2)]

        for a in range(d):
            h = g.spacing[a]
            recon = [fv.reconstruct(fv.along(p, a), a) for p in padded]
            rho_bar_face = fv.face_average(fv.along(self.rho_bar_pad, a), a)
            rho_l = rho_bar_face + recon[0][0]
            rho_r = rho_bar_face + recon[0][1]
            theta_bar_face = fv.face_average(fv.along(self.theta_bar_pad, a), a)
            rho_theta_bar_face = fv.face_average(
                fv.along(self.rho_theta_bar_pad, a), a)
            un_l = recon[1 + a][0] / rho_l
            un_r = recon[1 + a][1] / rho_r
            lam = 2.0 * np.maximum(np.abs(un_l), np.abs(un_r))
            thp_l = (rho_theta_bar_face + recon[-1][0]) / rho_l - theta_bar_face
            thp_r = (rho_theta_bar_face + recon[-1][1]) / rho_r - theta_bar_face

            for k in range(d + 2):
                wl, wr = recon[k]
                if k == 0:
                    fl = np.zeros_like(wl)
                    fr = np.zeros_like(wr)
                elif k <= d:
                    fl = wl * un_l
                    fr = wr * un_r
                else:
                    fl = thp_l * recon[1 + a][0]
                    fr = thp_r * recon[1 + a][1]
                flux = fv.rusanov_flux(fl, fr, wl, wr, lam)
                tend[k] -= fv.face_divergence(flux, a, h)

        # nonlinear diffusion remainder: full tensor diffusion minus the
        # linearized part already inside the implicit matrix
        tend_full = self._full_diffusion(flow, rho, u, theta, theta_p)
        lin_diff = self.linear_diffusion_matrix @ flow.to_vector()
        lin_diff = FlowState.from_vector(lin_diff, g.cells)
        for k, (full, lin) in enumerate(zip(
                tend_full,
                [lin_diff.rho_p] + lin_diff.rho_u + [lin_diff.rho_theta_p])):
            tend[k] += full - lin

        if s_theta is not None:
            tend[-1] += s_theta

        return FlowState(tend[0], tend[1:1 + d], tend[-1])

    def _full_diffusion(self, flow, rho, u, theta, theta_p):
        """Discrete nonlinear-form diffusion operators.

        Momentum: div(mu_m rho (grad u + grad u^T)) from cell-centered
        gradients; heat: div(mu_h rho grad theta) with face-averaged
        coefficients.
        """
        g = self.grid
        d = g.dim
        out = [np.zeros(g.cells)]  # no diffusion in the continuity equation

        u_pad = [apply_boundary(u[s], self.bc.rules(f"momentum{s}"))
                 for s in range(d)]
        grad = [[fv.first_derivative(fv.along(u_pad[s_], r), r, g.spacing[r])
                 for r in range(d)] for s_ in range(d)]
        for s in range(d):
            acc = np.zeros(g.cells)
            for r in range(d):
                tau = self.mu_m * rho * (grad[s][r] + grad[r][s])
                tau_pad = apply_boundary(tau, self.bc.rules("scalar"))
                acc += fv.first_derivative(fv.along(tau_pad, r), r, g.spacing[r])
            out.append(acc)

        theta_pad = self.theta_bar_pad + self._pad_theta_p(theta_p)
        coeff_pad = self.mu_h * (self.rho_bar_pad
                                 + apply_boundary(flow.rho_p, self.bc.rules("scalar")))
        heat = np.zeros(g.cells)
        for r in range(d):
            heat += fv.diffusion_term(fv.along(theta_pad, r),
                                      fv.along(coeff_pad, r), r, g.spacing[r])
        out.append(heat)
        return out

    def eval_unsplit(self, flow: FlowState, s_theta=None) -> FlowState:
        """Ghost-based evaluation of the full semi-discrete right-hand side
        (central flux for the linear part, Rusanov for the nonlinear part,
        full diffusion, gravity, heating). Used to validate the split."""
        g = self.grid
        d = g.dim
        tend = [np.zeros(g.cells) for _ in range(d + 2)]

        # nonlinear tendency holds D_full - D_L; adding D_L back yields the
        # Rusanov advection plus the full diffusion
        nl = self.eval_nonlinear(flow, s_theta)
        lin_diff_vec = self.linear_diffusion_matrix @ flow.to_vector()
        lin_diff = FlowState.from_vector(lin_diff_vec, g.cells)
        parts_nl = [nl.rho_p] + nl.rho_u + [nl.rho_theta_p]
        parts_ld = [lin_diff.rho_p] + lin_diff.rho_u + [lin_diff.rho_theta_p]
        for k in range(d + 2):
            tend[k] = parts_nl[k] + parts_ld[k]

        # central flux divergence of the linear flux, via ghosts
        press = self.pressure_coeff * flow.rho_theta_p
        press_pad = apply_boundary(press, self.bc.rules("scalar"))
        for a in range(d):
            h = g.spacing[a]
            mom_pad = apply_boundary(flow.rho_u[a], self.bc.rules(f"momentum{a}"))
            tend[0] -= fv.face_divergence(
                fv.central_flux(fv.along(mom_pad, a), a), a, h)
            tend[1 + a] -= fv.face_divergence(
                fv.central_flux(fv.along(press_pad, a), a), a, h)
            tt = self.background.theta_bar * flow.rho_u[a]
            tt_pad = apply_boundary(tt, self.bc.rules(f"momentum{a}"))
            tend[d + 1] -= fv.face_divergence(
                fv.central_flux(fv.along(tt_pad, a), a), a, h)

        tend[1 + g.vertical_axis] -= self.consts.g * flow.rho_p
        return FlowState(tend[0], tend[1:1 + d], tend[-1])

    # -- time stepping -----------------------------------------------------

    def _implicit_factors(self, dt):
        key = round(float(dt), 12)
        if key not in self._implicit_cache:
            n = self.linear_matrix.shape[0]
            M = (sp.identity(n) - IMEX_BETA * dt * self.linear_matrix).tocsc()
            ilu = spla.spilu(M, drop_tol=self.ilu_drop_tol,
                             fill_factor=self.ilu_fill_factor)
            prec = spla.LinearOperator(M.shape, ilu.solve)
            self._implicit_cache[key] = (M.tocsr(), prec)
        return self._implicit_cache[key]

    def imex_step(self, flow: FlowState, dt, s_theta=None) -> FlowState:
        """One ARS-type two-stage IMEX step of size dt."""
        vec = flow.to_vector()

        def N(v):
            st = FlowState.from_vector(v, self.grid.cells)
            return self.eval_nonlinear(st, s_theta).to_vector()

        out = imex_ars222_vec(vec, dt, self.linear_matrix, N,
                              solver=self._make_solver(dt))
        return FlowState.from_vector(out, self.grid.cells)

    def _make_solver(self, dt):
        M, prec = self._implicit_factors(dt)

        def solve(rhs, x0=None):
            return linear_solve(M, rhs, tol=self.gmres_tol,
                                restart=self.gmres_restart,
                                maxiter=self.gmres_maxiter,
                                preconditioner=prec, x0=x0)
        return solve


def imex_ars222_vec(w, dt, A, N, solver=None):
    """Two-stage, second-order IMEX step on a vector state.

    A is the (sparse) linear operator treated implicitly, N the explicit
    nonlinear evaluator. When no solver is supplied a direct sparse solve
    of (I - beta dt A) is used.
    """
    beta, delta = IMEX_BETA, IMEX_DELTA
    n = w.shape[0]
    if solver is None:
        M = (sp.identity(n) - beta * dt * sp.csr_matrix(A)).tocsc()
        lu = spla.splu(M)
        def solver(rhs, x0=None):
            return lu.solve(rhs)

    n_w = N(w)
    w1 = solver(w + beta * dt * n_w, x0=w)
    n_w1 = N(w1)
    rhs = (w + dt * (delta * n_w + (1.0 - delta) * n_w1)
           + dt * (1.0 - beta) * (A @ w1))
    w2 = solver(rhs, x0=w1)
    return w2
