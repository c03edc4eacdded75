"""Forward-backward C-grid step, two implementations.

Layout: ``h`` (nlat, nlon) at cell centers, ``u`` (nlat, nlon+1) on
west/east faces, ``v`` (nlat+1, nlon) on south/north faces.  Both kernels
evaluate the same expressions in the same order so results agree to
rounding (usually bit for bit).
"""

import numpy as np

from ._accel import njit


# numpy ------------------------------------------------------------------------


def _lap_u_np(u, dx_c, dy):
    p = np.pad(u, 1, mode="edge")
    dx2 = (dx_c * dx_c)[:, None]
    return (p[1:-1, 2:] - 2.0 * u + p[1:-1, :-2]) / dx2 + (p[2:, 1:-1] - 2.0 * u + p[:-2, 1:-1]) / (dy * dy)


def _lap_v_np(v, dx_v, dy):
    p = np.pad(v, 1, mode="edge")
    dx2 = (dx_v * dx_v)[:, None]
    return (p[1:-1, 2:] - 2.0 * v + p[1:-1, :-2]) / dx2 + (p[2:, 1:-1] - 2.0 * v + p[:-2, 1:-1]) / (dy * dy)


def step_numpy(h, u, v, zb, ocean, umask, vmask, dx_c, dx_v, dy, area, f_u, f_v,
               damp_c, damp_u, damp_v, g_eff, c_d, nu4, dt):
    nlat, nlon = h.shape

    # continuity, flux form
    hu = np.zeros_like(u)
    hu[:, 1:-1] = 0.5 * (h[:, :-1] + h[:, 1:])
    hv = np.zeros_like(v)
    hv[1:-1, :] = 0.5 * (h[:-1, :] + h[1:, :])
    flux_u = u * hu * dy
    flux_v = v * hv * dx_v[:, None]
    div = (flux_u[:, 1:] - flux_u[:, :-1]) + (flux_v[1:, :] - flux_v[:-1, :])
    h_new = np.where(ocean, h - dt * div / area[:, None], h)
    eta = np.where(ocean, h_new + zb, 0.0)

    # tendencies from the old velocities
    vbar = np.zeros_like(u)
    vbar[:, 1:-1] = 0.25 * (v[:-1, :-1] + v[:-1, 1:] + v[1:, :-1] + v[1:, 1:])
    ubar = np.zeros_like(v)
    ubar[1:-1, :] = 0.25 * (u[:-1, :-1] + u[:-1, 1:] + u[1:, :-1] + u[1:, 1:])

    pu = np.pad(u, 1, mode="edge")
    dxc = dx_c[:, None]
    back_x = (u - pu[1:-1, :-2]) / dxc
    fwd_x = (pu[1:-1, 2:] - u) / dxc
    back_y = (u - pu[:-2, 1:-1]) / dy
    fwd_y = (pu[2:, 1:-1] - u) / dy
    dudx = np.where(u > 0.0, back_x, fwd_x)
    dudy = np.where(vbar > 0.0, back_y, fwd_y)
    adv_u = -(u * dudx + vbar * dudy)

    pv = np.pad(v, 1, mode="edge")
    dxv = dx_v[:, None]
    back_x = (v - pv[1:-1, :-2]) / dxv
    fwd_x = (pv[1:-1, 2:] - v) / dxv
    back_y = (v - pv[:-2, 1:-1]) / dy
    fwd_y = (pv[2:, 1:-1] - v) / dy
    dvdx = np.where(ubar > 0.0, back_x, fwd_x)
    dvdy = np.where(v > 0.0, back_y, fwd_y)
    adv_v = -(ubar * dvdx + v * dvdy)

    hfu = np.ones_like(u)
    hfu[:, 1:-1] = 0.5 * (h_new[:, :-1] + h_new[:, 1:])
    hfv = np.ones_like(v)
    hfv[1:-1, :] = 0.5 * (h_new[:-1, :] + h_new[1:, :])
    hfu = np.where(umask, hfu, 1.0)
    hfv = np.where(vmask, hfv, 1.0)
    drag_u = -c_d * np.sqrt(u * u + vbar * vbar) * u / hfu
    drag_v = -c_d * np.sqrt(ubar * ubar + v * v) * v / hfv

    visc_u = -nu4 * _lap_u_np(_lap_u_np(u, dx_c, dy), dx_c, dy)
    visc_v = -nu4 * _lap_v_np(_lap_v_np(v, dx_v, dy), dx_v, dy)

    # u first with the old v, then v with the new u (stable Coriolis)
    press_u = np.zeros_like(u)
    press_u[:, 1:-1] = -g_eff * (eta[:, 1:] - eta[:, :-1]) / dxc
    u_new = u + dt * (press_u + f_u[:, None] * vbar + adv_u + drag_u + visc_u)
    u_new = np.where(umask, u_new, 0.0)

    ubar_new = np.zeros_like(v)
    ubar_new[1:-1, :] = 0.25 * (u_new[:-1, :-1] + u_new[:-1, 1:] + u_new[1:, :-1] + u_new[1:, 1:])
    press_v = np.zeros_like(v)
    press_v[1:-1, :] = -g_eff * (eta[1:, :] - eta[:-1, :]) / dy
    v_new = v + dt * (press_v - f_v[:, None] * ubar_new + adv_v + drag_v + visc_v)
    v_new = np.where(vmask, v_new, 0.0)

    # sponge relaxation toward rest (weights are zero for closed runs)
    h_new = np.where(ocean, (h_new + zb) * (1.0 - damp_c) - zb, h_new)
    u_new = u_new * (1.0 - damp_u)
    v_new = v_new * (1.0 - damp_v)
    return h_new, u_new, v_new


# numba ------------------------------------------------------------------------


@njit(cache=True)
def _lap_u_nb(u, dx_c, dy):
    nlat, nf = u.shape
    out = np.empty_like(u)
    for i in range(nlat):
        im = max(i - 1, 0)
        ip = min(i + 1, nlat - 1)
        dx2 = dx_c[i] * dx_c[i]
        for j in range(nf):
            jm = max(j - 1, 0)
            jp = min(j + 1, nf - 1)
            out[i, j] = (u[i, jp] - 2.0 * u[i, j] + u[i, jm]) / dx2 + (u[ip, j] - 2.0 * u[i, j] + u[im, j]) / (dy * dy)
    return out


@njit(cache=True)
def _lap_v_nb(v, dx_v, dy):
    nf, nlon = v.shape
    out = np.empty_like(v)
    for i in range(nf):
        im = max(i - 1, 0)
        ip = min(i + 1, nf - 1)
        dx2 = dx_v[i] * dx_v[i]
        for j in range(nlon):
            jm = max(j - 1, 0)
            jp = min(j + 1, nlon - 1)
            out[i, j] = (v[i, jp] - 2.0 * v[i, j] + v[i, jm]) / dx2 + (v[ip, j] - 2.0 * v[i, j] + v[im, j]) / (dy * dy)
    return out


@njit(cache=True)
def step_numba(h, u, v, zb, ocean, umask, vmask, dx_c, dx_v, dy, area, f_u, f_v,
               damp_c, damp_u, damp_v, g_eff, c_d, nu4, dt):
    nlat, nlon = h.shape

    h_new = h.copy()
    eta = np.zeros_like(h)
    for i in range(nlat):
        for j in range(nlon):
            if ocean[i, j]:
                fw = 0.0
                fe = 0.0
                fs = 0.0
                fn = 0.0
                if j > 0:
                    fw = u[i, j] * (0.5 * (h[i, j - 1] + h[i, j])) * dy
                if j < nlon - 1:
                    fe = u[i, j + 1] * (0.5 * (h[i, j] + h[i, j + 1])) * dy
                if i > 0:
                    fs = v[i, j] * (0.5 * (h[i - 1, j] + h[i, j])) * dx_v[i]
                if i < nlat - 1:
                    fn = v[i + 1, j] * (0.5 * (h[i, j] + h[i + 1, j])) * dx_v[i + 1]
                div = (fe - fw) + (fn - fs)
                h_new[i, j] = h[i, j] - dt * div / area[i]
                eta[i, j] = h_new[i, j] + zb[i, j]

    lu = _lap_u_nb(_lap_u_nb(u, dx_c, dy), dx_c, dy)
    lv = _lap_v_nb(_lap_v_nb(v, dx_v, dy), dx_v, dy)

    u_new = np.zeros_like(u)
    for i in range(nlat):
        im = max(i - 1, 0)
        ip = min(i + 1, nlat - 1)
        for j in range(1, nlon):
            if not umask[i, j]:
                continue
            u0 = u[i, j]
            vb = 0.25 * (v[i, j - 1] + v[i, j] + v[i + 1, j - 1] + v[i + 1, j])
            if u0 > 0.0:
                dudx = (u0 - u[i, j - 1]) / dx_c[i]
            else:
                dudx = (u[i, j + 1] - u0) / dx_c[i]
            if vb > 0.0:
                dudy = (u0 - u[im, j]) / dy
            else:
                dudy = (u[ip, j] - u0) / dy
            adv = -(u0 * dudx + vb * dudy)
            hf = 0.5 * (h_new[i, j - 1] + h_new[i, j])
            drag = -c_d * np.sqrt(u0 * u0 + vb * vb) * u0 / hf
            visc = -nu4 * lu[i, j]
            press = -g_eff * (eta[i, j] - eta[i, j - 1]) / dx_c[i]
            u_new[i, j] = u0 + dt * (press + f_u[i] * vb + adv + drag + visc)

    v_new = np.zeros_like(v)
    for i in range(1, nlat):
        for j in range(nlon):
            if not vmask[i, j]:
                continue
            jm = max(j - 1, 0)
            jp = min(j + 1, nlon - 1)
            v0 = v[i, j]
            ub = 0.25 * (u[i - 1, j] + u[i - 1, j + 1] + u[i, j] + u[i, j + 1])
            ubn = 0.25 * (u_new[i - 1, j] + u_new[i - 1, j + 1] + u_new[i, j] + u_new[i, j + 1])
            if ub > 0.0:
                dvdx = (v0 - v[i, jm]) / dx_v[i]
            else:
                dvdx = (v[i, jp] - v0) / dx_v[i]
            if v0 > 0.0:
                dvdy = (v0 - v[i - 1, j]) / dy
            else:
                dvdy = (v[i + 1, j] - v0) / dy
            adv = -(ub * dvdx + v0 * dvdy)
            hf = 0.5 * (h_new[i - 1, j] + h_new[i, j])
            drag = -c_d * np.sqrt(ub * ub + v0 * v0) * v0 / hf
            visc = -nu4 * lv[i, j]
            press = -g_eff * (eta[i, j] - eta[i - 1, j]) / dy
            v_new[i, j] = v0 + dt * (press - f_v[i] * ubn + adv + drag + visc)

    for i in range(nlat):
        for j in range(nlon):
            if ocean[i, j]:
                h_new[i, j] = (h_new[i, j] + zb[i, j]) * (1.0 - damp_c[i, j]) - zb[i, j]
    for i in range(nlat):
        for j in range(nlon + 1):
            u_new[i, j] = u_new[i, j] * (1.0 - damp_u[i, j])
    for i in range(nlat + 1):
        for j in range(nlon):
            v_new[i, j] = v_new[i, j] * (1.0 - damp_v[i, j])
    return h_new, u_new, v_new
