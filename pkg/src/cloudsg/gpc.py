"""Legendre polynomial chaos machinery on (-1, 1) with a uniform input.

Provides the quadrature basis, forward/backward discrete Legendre transforms,
moment diagnostics, the Galerkin-projected cloud coefficient system (built on
the deterministic cloud operators: linear transport applied per mode, the
rain sedimentation flux and all reactions evaluated pseudo-spectrally at the
quadrature nodes), and a generic collocation driver.
"""

from dataclasses import dataclass

import numpy as np

from cloudsg import fv, microphysics
from cloudsg.cloud import CloudSolver, CloudTendency, inverse_density
from cloudsg.grid import apply_boundary

MAX_DEGREE = 64


@dataclass(frozen=True)
class GpcBasis:
    """(M+1)-point Gauss-Legendre rule and the Legendre value table.

    phi[k, l] holds the degree-k polynomial at node l. The forward transform
    matrix dlt_matrix[k, l] = (2k+1)/2 * beta_l * phi[k, l] maps node values
    to coefficients; phi.T maps coefficients back to node values.
    """

    M: int
    nodes: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    dlt_matrix: np.ndarray


def basis_init(M: int) -> GpcBasis:
    if M < 0:
        raise ValueError("polynomial degree must be nonnegative")
    if M > MAX_DEGREE:
        raise ValueError(f"degree {M} exceeds the supported maximum {MAX_DEGREE}")
    nodes, weights = np.polynomial.legendre.leggauss(M + 1)
    phi = np.empty((M + 1, M + 1))
    phi[0] = 1.0
    if M >= 1:
        phi[1] = nodes
    for k in range(2, M + 1):
        phi[k] = ((2 * k - 1) * nodes * phi[k - 1] - (k - 1) * phi[k - 2]) / k
    scale = (2.0 * np.arange(M + 1) + 1.0) / 2.0
    dlt_matrix = scale[:, None] * weights[None, :] * phi
    return GpcBasis(M=M, nodes=nodes, weights=weights, phi=phi,
                    dlt_matrix=dlt_matrix)


def dlt(values, basis: GpcBasis):
    """Node values (nodes on axis 0) -> coefficients (modes on axis 0)."""
    values = np.asarray(values)
    if values.shape[0] != basis.M + 1:
        raise ValueError("leading axis must hold one value per node")
    return np.tensordot(basis.dlt_matrix, values, axes=(1, 0))


def idlt(coeffs, basis: GpcBasis):
    """Coefficients (modes on axis 0) -> node values (nodes on axis 0)."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] != basis.M + 1:
        raise ValueError("leading axis must hold one coefficient per mode")
    return np.tensordot(basis.phi.T, coeffs, axes=(1, 0))


def mean_std(coeffs, basis: GpcBasis):
    """Pointwise mean (mode 0) and standard deviation of a coefficient field."""
    coeffs = np.asarray(coeffs)
    mean = coeffs[0]
    k = np.arange(1, basis.M + 1)
    if k.size == 0:
        return mean, np.zeros_like(mean)
    inv = 1.0 / (2.0 * k + 1.0)
    var = np.tensordot(inv, coeffs[1:] ** 2, axes=(0, 0))
    return mean, np.sqrt(var)


def domain_average_diagnostics(coeffs, basis: GpcBasis):
    """Mean and standard deviation of the domain-averaged quantity.

    The spatial average is taken per mode first; its variance therefore
    reflects cancellation across cells rather than the average of pointwise
    variances.
    """
    coeffs = np.asarray(coeffs)
    spatial_axes = tuple(range(1, coeffs.ndim))
    avg = coeffs.mean(axis=spatial_axes)
    mean = float(avg[0])
    k = np.arange(1, basis.M + 1)
    if k.size == 0:
        return mean, 0.0
    sigma = float(np.sqrt(np.sum(avg[1:] ** 2 / (2.0 * k + 1.0))))
    return mean, sigma


def nodal_parameters(param_modes, basis: GpcBasis):
    """Nodal values of an expanded scalar parameter; validates positivity."""
    modes = np.zeros(basis.M + 1)
    arr = np.asarray(param_modes, dtype=float)
    modes[:arr.shape[0]] = arr
    vals = basis.phi.T @ modes
    if np.any(vals <= 0.0):
        raise ValueError("parameter expansion produces nonpositive nodal values")
    return vals


class CollocationNodeError(RuntimeError):
    def __init__(self, node, cause):
        super().__init__(f"collocation run failed at node {node}: {cause}")
        self.node = node


def collocation_run(run_node, basis: GpcBasis):
    """Run a deterministic model per quadrature node and transform.

    run_node(l, omega_l) must return an array (the final state at that node);
    results are stacked on a new leading axis and pushed through the forward
    transform.
    """
    outs = []
    for l, omega in enumerate(basis.nodes):
        try:
            outs.append(np.asarray(run_node(l, float(omega))))
        except Exception as exc:
            raise CollocationNodeError(l, exc) from exc
    return dlt(np.stack(outs), basis)


class GalerkinCloudSolver:
    """Coefficient system of the cloud equations under Legendre chaos.

    States are arrays shaped (3, M+1, *cells). Density and velocity stay
    deterministic; uncertainty enters through the initial cloud state or
    through the process parameters k1, k2 and alpha, whose expansions are
    evaluated at the quadrature nodes once.
    """

    def __init__(self, det: CloudSolver, basis: GpcBasis,
                 k1_modes=None, k2_modes=None, alpha_modes=None):
        self.det = det
        self.basis = basis
        p = det.params
        self.k1_nodes = (nodal_parameters(k1_modes, basis) if k1_modes is not None
                         else np.full(basis.M + 1, p.k1))
        self.k2_nodes = (nodal_parameters(k2_modes, basis) if k2_modes is not None
                         else np.full(basis.M + 1, p.k2))
        self.alpha_nodes = (nodal_parameters(alpha_modes, basis)
                            if alpha_modes is not None
                            else np.full(basis.M + 1, p.alpha))

    def lift(self, wq):
        """Embed a deterministic state into mode 0."""
        out = np.zeros((3, self.basis.M + 1) + wq.shape[1:])
        out[:, 0] = wq
        return out

    def transport(self, chat, rho, u):
        """Per-mode advection/diffusion plus pseudo-spectral sedimentation."""
        det = self.det
        g = det.grid
        d = g.dim
        vert = g.vertical_axis
        basis = self.basis
        tend = np.zeros_like(chat)

        rho_pad = apply_boundary(np.asarray(rho, dtype=float), det._scalar_rules)
        chat_pad = apply_boundary(chat, det._scalar_rules, lead=2)
        bottom_rate = 0.0

        for a in range(d):
            h = g.spacing[a]
            u_pad = apply_boundary(u[a], det.bc.rules(f"momentum{a}"))
            u_face = fv.face_average(fv.along(u_pad, a), a)
            lam = np.abs(u_face)
            rho_face = fv.face_average(fv.along(rho_pad, a), a)

            for comp in range(3):
                # spatial axis a sits at array axis 1 + a (after the mode axis)
                wl, wr = fv.reconstruct(fv.along(chat_pad[comp], 1 + a, lead=1),
                                        1 + a)
                if comp == 2 and a == vert and det.sedimentation:
                    flux = self._rain_vertical_flux(wl, wr, u_face, lam, rho_face)
                else:
                    flux = fv.rusanov_flux(wl * u_face, wr * u_face, wl, wr, lam)
                if comp == 2 and a == vert and det.sedimentation \
                        and det.bc.kinds[a] == "wall":
                    flux = det._fix_vertical_wall_flux(flux, 1 + a)
                    bottom_rate = -float(
                        np.sum(np.take(flux[0], 0, axis=a))) * g.cell_volume / h
                tend[comp] -= fv.face_divergence(flux, 1 + a, h)

        coeff_pad = det.mu_q * rho_pad
        inv_rho_pad = inverse_density(rho_pad)
        for comp in range(3):
            q_pad = chat_pad[comp] * inv_rho_pad
            for a in range(d):
                # singleton mode axis so the coefficient tracks the field axis
                tend[comp] += fv.diffusion_term(
                    fv.along(q_pad, 1 + a, lead=1),
                    fv.along(coeff_pad, a)[None], 1 + a, g.spacing[a])
        return tend, bottom_rate

    def _rain_vertical_flux(self, wl, wr, u_face, lam, rho_face):
        """Vertical rain flux with sedimentation, pseudo-spectral in omega.

        Nodal face states are synthesized from the mode coefficients, the
        physical flux is evaluated per node (with nodal alpha) and projected
        back; the Rusanov dissipation uses one shared bound, the maximum of
        the nodal flux-Jacobian bounds, applied mode by mode.
        """
        det = self.det
        basis = self.basis
        nl = idlt(wl, basis)
        nr = idlt(wr, basis)
        beta = det.params.beta
        fl = np.empty_like(nl)
        fr = np.empty_like(nr)
        lam_c = np.broadcast_to(lam, nl.shape[1:]).copy()
        for node in range(basis.M + 1):
            a_n = self.alpha_nodes[node]
            q_l = np.maximum(nl[node], 0.0) / rho_face
            q_r = np.maximum(nr[node], 0.0) / rho_face
            v_l = microphysics.fall_speed(q_l, rho_face, det.params, det.consts,
                                          alpha=a_n)
            v_r = microphysics.fall_speed(q_r, rho_face, det.params, det.consts,
                                          alpha=a_n)
            fl[node] = nl[node] * u_face - v_l * nl[node]
            fr[node] = nr[node] * u_face - v_r * nr[node]
            lam_c = np.maximum(lam_c,
                               lam + (1.0 + beta) * np.maximum(v_l, v_r))
        fhat_l = dlt(fl, basis)
        fhat_r = dlt(fr, basis)
        return 0.5 * (fhat_l + fhat_r) - 0.5 * lam_c * (wr - wl)

    def reactions(self, chat, rho, theta):
        """Pseudo-spectral reaction tendencies, exactly summing to zero
        per mode across the three variables."""
        basis = self.basis
        nodal = idlt(np.moveaxis(chat, 0, 1), basis)  # (nodes, 3, *cells)
        r1 = np.empty((basis.M + 1,) + chat.shape[2:])
        r2 = np.empty_like(r1)
        for node in range(basis.M + 1):
            rb = self.det.reaction_rates(
                nodal[node], rho, theta,
                k1=self.k1_nodes[node], k2=self.k2_nodes[node],
                alpha=self.alpha_nodes[node])
            r1[node] = rb.R1
            r2[node] = rb.R2
        rhat1 = dlt(r1, basis)
        rhat2 = dlt(r2, basis)
        return np.stack([rhat1, rhat2, -(rhat1 + rhat2)])

    def rhs(self, chat, rho, u, theta) -> CloudTendency:
        tend, bottom = self.transport(chat, rho, u)
        tend += self.reactions(chat, rho, theta)
        return CloudTendency(tend, bottom)

    def source_theta_mean(self, chat, rho, theta):
        """Latent heating from the expected (mode-0) cloud state; keeps the
        flow deterministic."""
        return self.det.source_theta(chat[:, 0], rho, theta)

    def cfl_dt(self, chat, rho, u, limit=0.5, dt_max=np.inf, safety=0.9):
        """Step bounds with the fall speed maximized over quadrature nodes."""
        det = self.det
        g = det.grid
        vert = g.vertical_axis
        nodal_qr = idlt(chat[2], self.basis)
        v_max = np.zeros(g.cells)
        for node in range(self.basis.M + 1):
            q_r = np.maximum(nodal_qr[node], 0.0) * inverse_density(rho)
            v = microphysics.fall_speed(q_r, rho, det.params, det.consts,
                                        alpha=self.alpha_nodes[node])
            v_max = np.maximum(v_max, v)
        speed = 0.0
        for a in range(g.dim):
            s = np.abs(u[a])
            if a == vert:
                s = s + v_max
            speed = max(speed, float(np.max(s)))
        adv = dt_max if speed <= 0.0 else min(
            dt_max, safety * limit * g.h_min / speed)
        if det.mu_q > 0.0:
            ratio = float(np.max(rho) / max(np.min(rho), 1e-8))
            diff = safety * g.h_min ** 2 / (2.0 * g.dim * det.mu_q * ratio)
        else:
            diff = dt_max
        return adv, min(adv, diff, dt_max)
