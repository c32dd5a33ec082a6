"""High-precision reference values for the Rust test suite.

Evaluates the closed forms directly with mpmath at 50 digits. Nothing here
imports or mirrors the Rust code paths; values printed by this script are
frozen into the tests under `tests/` and `src/**` unit tests.

    python3 reference_values.py
"""
from mpmath import mp, mpf, sqrt, pi, exp, diff, findroot, matrix, expm, mpc

mp.dps = 50

# Terfenol-D
rho = mpf("9.23e3")
c11 = mpf("5.5e10")
c33 = mpf("5.5e10")
q31 = mpf("-200")
q33 = mpf("400")
mu11 = mpf("6.23e-6")
mu33 = mpf("6.23e-6")
eps2 = mpf("1e3")

mu0 = mpf("1.25663706212e-6")
c = mpf("299792458")
hbar = mpf("1.054571817e-34")
mu_b = mpf("9.2740100783e-24")
g_s = mpf(2)
D_zfs = 2 * pi * mpf("2.87e9")

d = mpf("0.5e-6")


def resonances(d):
    wl2 = c11 * pi**2 / (rho * d**2)
    wo2 = wl2 + q31**2 / (d**2 * rho * mu11)
    pl2 = c33 * pi**2 / (rho * d**2)
    po2 = pl2 + q33**2 / (d**2 * rho * mu33)
    return sqrt(wl2), sqrt(wo2), sqrt(pl2), sqrt(po2)


wl, wo, pl, po = resonances(d)


def mu_perp(w):
    return mu11 / mu0 * (wo**2 - w**2) / (wl**2 - w**2)


def mu_par(w):
    return mu33 / mu0 * (po**2 - w**2) / (pl**2 - w**2)


def kp2(w):
    k0 = w / c
    a, b = mu_perp(w), mu_par(w)
    return (eps2 - a) * b / (1 - a * b) * k0**2


def k1z2(w):
    k0 = w / c
    a, b = mu_perp(w), mu_par(w)
    return (1 - b * eps2) / (1 - a * b) * k0**2


def kp(w):
    return sqrt(kp2(w))


def energy_F(w):
    a, b = mu_perp(w), mu_par(w)
    da = diff(mu_perp, w)
    db = diff(mu_par, w)
    den = 2 * b * eps2 - a * b - 1
    return ((2 * a * b * (eps2 - a) - 2 * (eps2 - a)) / (a * den)
            + w * b * (1 - b * eps2) / (a * b * den) * da
            - w * (eps2 - a) / (a * b * den) * db)


def energy_M(w):
    a, b = mu_perp(w), mu_par(w)
    da = diff(mu_perp, w)
    db = diff(mu_par, w)
    q = (eps2 - a) - b * (1 - b * eps2)
    return ((2 * b * (eps2 - a) - 2 * b**2 * a * (eps2 - a)) / q
            - w * b * (1 - b * eps2) / q * da
            + w * (eps2 - a) / q * db)


def mode_length(w):
    k1 = sqrt(-k1z2(w))
    # first (wavenumber) form, independent of the permeability bracket form
    return energy_F(w) / (4 * k1) * (1 + kp2(w) / (-k1z2(w)))


def g_single(w, z=0):
    k1 = sqrt(-k1z2(w))
    return mu_b * g_s / 2 * sqrt(w * mu0 / (hbar * mode_length(w))) * exp(-k1 * z)


def g_collective(w, n, h, frac=mpf(1) / 4):
    k1 = sqrt(-k1z2(w))
    return sqrt(frac) * sqrt(n * mp.quad(lambda z: g_single(w, z) ** 2, [0, h]))


def p(name, val):
    print(f"{name:<32} {mp.nstr(val, 20)}")


wm = (wl + wo) / 2
p("omega_perp_l", wl)
p("omega_perp_o", wo)
p("omega_par_l", pl)
p("omega_par_o", po)
p("mu_perp_static", mu11 / mu0 * wo**2 / wl**2)
p("mu_perp_midgap", mu_perp(wm))
p("mu_par_midgap", mu_par(wm))
p("kp_midgap", kp(wm))
p("k1z_abs_midgap", sqrt(-k1z2(wm)))
p("k2z_abs_midgap", sqrt(-k1z2(wm)) * abs(mu_perp(wm)))
p("ratio_hx_h1z_sq_midgap", -k1z2(wm) / kp2(wm))
p("ratio_hx_h2z_sq_midgap", -(mu_par(wm) ** 2) * k1z2(wm) * mu_perp(wm) ** 2 / (mu_perp(wm) ** 2 * kp2(wm)))
p("F_midgap", energy_F(wm))
p("M_midgap", energy_M(wm))
p("mode_length_midgap", mode_length(wm))
z = mpf("0.5e-3")
k1 = sqrt(-k1z2(wm))
pol2 = (1 + kp2(wm) / (-k1z2(wm))) / mode_length(wm) * exp(-2 * k1 * z)
p("polarization_norm_z0p5mm", sqrt(pol2))
p("b_vec_norm_z0p5mm", sqrt(hbar * wm * mu0 / 2) * sqrt(pol2))
p("g_single_midgap_z0", g_single(wm))
n = mpf("2e24")
h = mpf("1e-3")
p("G_midgap_n2e24_h1mm", g_collective(wm, n, h))

# maximise G over the bound segment
def den(w):
    return 1 - mu_perp(w) * mu_par(w)

ws = findroot(den, (wl + (wo - wl) * mpf("0.9"), wo - (wo - wl) * mpf("1e-6")), solver="anderson")
p("asymptote_omega", ws)
gr = (sqrt(5) - 1) / 2
a_, b_ = wl + (ws - wl) * mpf("0.3"), wl + (ws - wl) * mpf("0.8")
Gf = lambda w: g_collective(w, n, h)
for _ in range(90):
    x1 = b_ - gr * (b_ - a_)
    x2 = a_ + gr * (b_ - a_)
    if Gf(x1) > Gf(x2):
        b_ = x2
    else:
        a_ = x1
wmax = (a_ + b_) / 2
p("G_max_omega", wmax)
p("G_max", Gf(wmax))
p("G_max_over_2pi_9MHz", Gf(wmax) / (2 * pi * mpf("9e6")))

wt = findroot(lambda w: kp(w) - 2 * pi / mpf("0.006"), wm + (wo - wl) * mpf("0.15"))
p("omega_at_lambda_6mm", wt)
p("freq_GHz_at_lambda_6mm", wt / (2 * pi * mpf("1e9")))

vg = 1 / diff(kp, wm)
p("group_velocity_midgap", vg)
kappa = mpf("0.001") * wl
p("propagation_length_midgap", vg / kappa)
p("wavelength_midgap", 2 * pi / kp(wm))

p("dephasing_1e25", mu0 * g_s**2 * mu_b**2 * mpf("1e25") / (4 * pi * hbar))
p("bz_for_3p4GHz", hbar * (2 * pi * mpf("3.4e9") - D_zfs) / (mu_b * g_s))

# swap fidelity, gamma_s = kappa = 0.1 G, number-operator dephasing.
# single-excitation block {|00>, |10> (magnon), |01> (polariton)}
G = mpf(1)
def liouvillian(G, gs, kp_):
    dim = 3
    Sm = matrix(dim, dim); Sm[0, 1] = 1          # magnon lowering
    Am = matrix(dim, dim); Am[0, 2] = 1          # polariton lowering
    H = matrix(dim, dim); H[1, 2] = G; H[2, 1] = G
    N = Sm.H * Sm
    ops = [(gs, N), (kp_, Am)]
    L = matrix(dim * dim, dim * dim)
    for col in range(dim * dim):
        rho = matrix(dim, dim)
        rho[col // dim, col % dim] = 1
        out = -1j * (H * rho - rho * H)
        for rate, o in ops:
            od = o.H
            out += rate * (o * rho * od - (od * o * rho) / 2 - (rho * od * o) / 2)
        for r in range(dim * dim):
            L[r, col] = out[r // dim, r % dim]
    return L

def evolve(G, gs, kp_, t):
    rho0 = matrix(9, 1); rho0[2 * 3 + 2] = 1
    return expm(liouvillian(G, gs, kp_) * t) * rho0

T = pi / (2 * G)
r = evolve(G, mpf("0.1"), mpf("0.1"), T)
p("swap_fidelity_0p1", mp.re(r[1 * 3 + 1]))
p("swap_fidelity_0p1_lower_bound", exp(-mpf("0.2") * T))
