"""Built-in test corpus: curves, bundles, flags, loops and named scenarios."""

from __future__ import annotations

from math import comb, pi

import numpy as np

from .bundle_fields import (SubbundleField, gauss_transform, osculating_flag, osculating_frames,
                            random_flag_field, veronese_curve)
from .numeric_core import BiPoly
from .splitting import HolomorphicSubbundle, LaurentMatrix, minimal_kernel_basis, transition_from_subbundle


def hol(columns) -> BiPoly:
    """Holomorphic frame from ``columns[j][i]`` coefficient lists."""
    return BiPoly.from_holomorphic(columns)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))[None, :]


def rotate(f: BiPoly, U: np.ndarray) -> BiPoly:
    return BiPoly.constant(U) @ f


def mobius(f: BiPoly, a: complex, b: complex, c: complex, d: complex) -> BiPoly:
    """Columns ``f_j((a z + b)/(c z + d)) (c z + d)^(deg f_j)``, still polynomial in z."""
    cols = []
    for j in range(f.shape[1]):
        col = f[:, [j]]
        n = col.degz

        def fn(z, w, col=col, n=n):
            den = c * z + d
            return col.eval((a * z + b) / den) * den**n

        cols.append(BiPoly.from_function(fn, f.shape[0], 1, n, 0))
    from .numeric_core import hstack

    return hstack(cols)


MOBIUS_PARAMS = [(1.0, 0.5, 0.0, 1.0), (2.0, 1.0, 0.5, 1.0), (1.0, 0.0, 0.5j, 1.0)]


def catalog_curves(seed: int = 0) -> dict:
    """Full holomorphic curves of degree <= 4 in C^(d <= 5)."""
    rng = np.random.default_rng(seed)
    out = {f"veronese-{D}": veronese_curve(D) for D in range(1, 5)}
    for D in (2, 3, 4):
        out[f"veronese-{D}-rotated"] = rotate(veronese_curve(D), random_unitary(rng, D + 1))
    for D, p in zip((2, 3, 4), MOBIUS_PARAMS):
        out[f"veronese-{D}-mobius"] = mobius(veronese_curve(D), *p)
    out["veronese-3-rotated-mobius"] = rotate(mobius(veronese_curve(3), *MOBIUS_PARAMS[1]),
                                              random_unitary(rng, 4))
    return out


def catalog_flags(seed: int = 0) -> dict:
    return {name: osculating_flag(f, label=name) for name, f in catalog_curves(seed).items()}


def alternating_sigmas(n: int) -> list[tuple]:
    return [tuple(range(1, n + 1, 2)), tuple(range(2, n + 1, 2))]


def random_flags(seed: int = 1234, count: int = 20) -> list:
    """Seeded random polynomial flag fields of assorted types."""
    rng = np.random.default_rng(seed)
    types = [(1, 1), (1, 2), (2, 1), (1, 1, 1), (1, 2, 1), (2, 1, 1), (1, 1, 1, 1), (2, 2)]
    out = []
    for k in range(count):
        tv = types[k % len(types)]
        out.append(random_flag_field(rng, sum(tv), tv, degz=1 + k % 2, degzbar=1))
    return out


# holomorphic subbundles --------------------------------------------------------

S2, S3, S6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)


def holomorphic_catalog() -> dict:
    """Name -> (frame, expected exponent pairs in descending beta)."""
    return {
        "constant-line": (hol([[[1], [0]]]), [(0, 1)]),
        "tautological": (hol([[[1], [0, 1]]]), [(1, 1)]),
        "mixed-degree": (hol([[[1], [0, 1], [0, 0, 1]], [[0], [0], [1]]]), [(1, 1), (0, 1)]),
        "rank2-kernel": (hol([[[1], [0, 1], [0]], [[0], [1], [0, 1]]]), [(1, 2)]),
        "conic": (veronese_curve(2), [(2, 1)]),
        "twisted-cubic": (veronese_curve(3), [(3, 1)]),
        "rational-normal-quartic": (veronese_curve(4), [(4, 1)]),
        "cubic-osculating-plane": (osculating_frames(veronese_curve(3))[1], [(2, 2)]),
        "conic-kernel": (minimal_kernel_basis(hol([[[1], [0, 1], [0, 0, 1]]]).T), [(1, 2)]),
        "split-sum": (hol([[[1], [0, 1], [0], [0]], [[0], [0], [1], [0, 0, 1]]]), [(2, 1), (1, 1)]),
        "trivial-plane": (BiPoly.identity(2), [(0, 2)]),
    }


def exact_holomorphic_catalog() -> dict:
    """Entries whose coefficients are exact in Q(sqrt 2, sqrt 3), for the symbolic oracle."""
    cat = holomorphic_catalog()
    cat["conic-kernel"] = (hol([[[0], [-1], [0, 1]], [[1, 0], [0, -1], [0]]]), [(1, 2)])
    return cat


def unimodular_change(r: int, rng: np.random.Generator) -> BiPoly:
    """Upper-triangular polynomial matrix with unit diagonal (determinant one)."""
    c = np.zeros((r, r, 2, 1), dtype=complex)
    for i in range(r):
        c[i, i, 0, 0] = 1.0
        for j in range(i + 1, r):
            c[i, j, :, 0] = rng.integers(-2, 3, size=2)
    return BiPoly(c)


# harmonic and non-harmonic fields ---------------------------------------------


def harmonic_fields(seed: int = 0) -> dict:
    """Name -> SubbundleField (or sum field) that should be harmonic."""
    curves = catalog_curves(seed)
    out = {}
    for name, (frame, _) in holomorphic_catalog().items():
        if frame.shape[1] < frame.shape[0]:
            out[f"hol-{name}"] = HolomorphicSubbundle(frame).field()
    out["gauss-line"] = gauss_transform(hol([[[1], [0, 1]]]))
    out["gauss-conic"] = gauss_transform(veronese_curve(2))
    out["gauss-cubic"] = gauss_transform(veronese_curve(3))
    for name in ("veronese-3", "veronese-4", "veronese-3-rotated", "veronese-4-mobius"):
        F = osculating_flag(curves[name])
        for sig in alternating_sigmas(F.length):
            out[f"{name}-sigma{''.join(map(str, sig))}"] = F.sigma_field(sig)
    out["antihol-taut-perp"] = SubbundleField(hol([[[1], [0, 1]]]), complement=True)
    return out


def nonharmonic_fields() -> dict:
    zb = BiPoly.zbar()
    z = BiPoly.z()
    one = BiPoly.constant([[1.0]])
    col = lambda *entries: _vstack(entries)
    return {
        "mixed-line": SubbundleField(col(one, z + zb * 0.5)),
        "perturbed-gauss": SubbundleField(gauss_transform(veronese_curve(2)).frame
                                          + BiPoly(np.pad(np.array([[[[0, 0], [0.3, 0]]]]),
                                                          ((2, 0), (0, 0), (0, 0), (0, 0))))),
        "zzbar-line": SubbundleField(col(one, z @ zb, z)),
        "conic-plus-zbar": SubbundleField(veronese_curve(2) + _e(3, 1) .scale(zb * 0.2)),
        "rank2-mixed": SubbundleField(BiPoly.from_function(
            lambda a, b: np.array([[1, 0], [a, 1], [0, b * b]]), 3, 2, 1, 2)),
        "random-bidegree": SubbundleField(BiPoly(np.random.default_rng(7).standard_normal((3, 1, 2, 2))
                                                 + np.array([1.0, 0, 0])[:, None, None, None])),
    }


def _e(d: int, i: int) -> BiPoly:
    c = np.zeros((d, 1, 1, 1), dtype=complex)
    c[i, 0, 0, 0] = 1.0
    return BiPoly(c)


def _vstack(entries) -> BiPoly:
    from .numeric_core import _pad

    nz = max(e.coef.shape[2] for e in entries)
    nb = max(e.coef.shape[3] for e in entries)
    return BiPoly(np.concatenate([_pad(e.coef, nz, nb) for e in entries], axis=0))


# loops --------------------------------------------------------------------------


def loop_catalog(seed: int = 5) -> dict:
    """Name -> (loop, expected kappa in descending order)."""
    rng = np.random.default_rng(seed)
    L = lambda coef, low: LaurentMatrix(np.asarray(coef, dtype=complex), low)
    out = {
        "identity": (LaurentMatrix.identity(2), (0, 0)),
        "diag-z-1": (L([[[0, 1], [0, 0]], [[0, 0], [1, 0]]], 0), (1, 0)),
        "upper-z-1": (L([[[0, 1], [1, 0]], [[0, 0], [1, 0]]], 0), (1, 0)),
        "diag-z2-zinv": (L([[[0, 0, 0, 1], [0, 0, 0, 0]], [[0, 0, 0, 0], [1, 0, 0, 0]]], -1), (2, -1)),
    }
    for name in ("tautological", "mixed-degree", "rank2-kernel", "conic-kernel", "split-sum"):
        frame, pairs = holomorphic_catalog()[name]
        E = HolomorphicSubbundle(frame)
        r = E.rank
        U = _laurent_from_poly(unimodular_change(r, rng))
        V = _laurent_from_poly(unimodular_change(r, rng).T)
        kappa = tuple(sorted((-b for b, m in pairs for _ in range(m)), reverse=True))
        out[f"glued-{name}"] = (transition_from_subbundle(E, U, _invert_variable(V)), kappa)
    return out


def _laurent_from_poly(b: BiPoly) -> LaurentMatrix:
    return LaurentMatrix(b.coef[:, :, :, 0], 0)


def _invert_variable(m: LaurentMatrix) -> LaurentMatrix:
    """``z -> 1/z``."""
    return LaurentMatrix(m.coef[:, :, ::-1].copy(), -m.high)


# presented harmonic bundles ---------------------------------------------------


def presented_catalog():
    """Name -> (PresentedBundle, expected flag field or None, expected sigma)."""
    from .bundle_fields import merge_flag
    from .twistor import PresentedBundle

    out = {}
    for name in ("tautological", "mixed-degree", "rank2-kernel", "conic", "split-sum"):
        frame, pairs = holomorphic_catalog()[name]
        out[f"hol-{name}"] = (PresentedBundle.present(frame, label=name), None, tuple(range(1, len(pairs) + 1)))
    for D in (2, 3, 4):
        f = veronese_curve(D)
        W = osculating_frames(f)
        osc = osculating_flag(f)
        for k in range(2, D + 1):
            E = PresentedBundle.present(W[k - 1], W[k - 2], label=f"veronese-{D}-E{k}")
            groups = [g for g in (list(range(1, k)), [k], list(range(k + 1, D + 2))) if g]
            out[f"veronese-{D}-E{k}"] = (E, merge_flag(osc, groups), (2,))
    return out


def reduction_catalog() -> dict:
    """Harmonic bundles of positive length."""
    from .twistor import PresentedBundle

    out = {}
    for name in ("mixed-degree", "split-sum"):
        out[f"hol-{name}"] = PresentedBundle.present(holomorphic_catalog()[name][0], label=name)
    for D in (2, 3, 4):
        W = osculating_frames(veronese_curve(D))
        for k in range(2, D + 1):
            out[f"veronese-{D}-E{k}-perp"] = PresentedBundle.present(W[k - 1], W[k - 2], complement=True,
                                                                     label=f"veronese-{D}-E{k}-perp")
    return out


def energy_line() -> float:
    return 2 * pi


# named CLI scenarios -----------------------------------------------------------


def _frame_entry(frame: BiPoly, inner: BiPoly | None = None, complement: bool = False) -> dict:
    return {"kind": "frame", "frame": frame.to_json(),
            "inner": None if inner is None else inner.to_json(), "complement": complement}


def _presented_entry(E) -> dict:
    return {"F": E.outer.to_json(), "F1": None if E.F1 is None else E.F1.to_json(),
            "complement": E.complement, "ambient": E.d}


def scenarios() -> dict:
    """Name -> (description, scenario dict)."""
    schema = 1
    out = {}

    def add(name, desc, task, inputs, grid=(16, 32), **extra):
        sc = {"schema_version": schema, "task": task, "name": name, "inputs": inputs,
              "grid": list(grid), "seed": 0}
        sc.update(extra)
        out[name] = (desc, sc)

    taut = hol([[[1], [0, 1]]])
    add("constant-map", "Constant line: zero energy, harmonic", "energy",
        {"bundle": _frame_entry(hol([[[1], [0]]])), "expect": {"energy": 0.0, "atol": 1e-12}}, grid=(40, 64))
    add("tautological-energy", "Tautological line has energy 2 pi", "energy",
        {"bundle": _frame_entry(taut), "expect": {"energy": 2 * pi, "rtol": 1e-6}}, grid=(40, 64))
    for D in (2, 3, 4):
        add(f"veronese-{D}-energy", f"Degree-{D} rational normal curve has {D} times the line energy", "energy",
            {"bundle": _frame_entry(veronese_curve(D)), "expect": {"energy": 2 * pi * D, "rtol": 1e-6}},
            grid=(40, 64))
    rescale = BiPoly(np.array([[[[2.0, 0.0], [0.0, 1.0]]]]))  # 2 + |z|^2
    add("tautological-energy-rescaled", "Energy is unchanged when the frame is scaled by 2 + |z|^2", "energy",
        {"bundle": _frame_entry(taut.scale(rescale)), "expect": {"energy": 2 * pi, "rtol": 1e-6}}, grid=(40, 64))
    add("tautological-split", "Splitting type of span(1, z)", "split",
        {"frame": taut.to_json(), "expect": {"exponents": [[1, 1]]}})
    for name in ("mixed-degree", "rank2-kernel", "conic-kernel", "split-sum"):
        frame, pairs = holomorphic_catalog()[name]
        add(f"{name}-hn", f"Filtration of the {name} bundle", "hn",
            {"frame": frame.to_json(), "expect": {"exponents": [list(p) for p in pairs]}})
    add("veronese-middle-harmonic", "Gauss transform of the conic: harmonic, neither holomorphic nor anti",
        "harmonic-check", {"bundle": {"kind": "gauss", "curve": veronese_curve(2).to_json()},
                           "expect": {"harmonic": True, "min_components": 0.1}})
    add("gauss-line", "Gauss transform of span(1, z) is the complement line", "harmonic-check",
        {"bundle": {"kind": "gauss", "curve": taut.to_json()}, "expect": {"harmonic": True}})
    add("tautological-harmonic", "Holomorphic bundles are harmonic", "harmonic-check",
        {"bundle": _frame_entry(taut), "expect": {"harmonic": True}})
    add("perturbed-gauss-nonharmonic", "Gauss transform of the conic with a zbar perturbation", "harmonic-check",
        {"bundle": _frame_entry(nonharmonic_fields()["perturbed-gauss"].frame), "expect": {"harmonic": False}})
    add("mixed-line-nonharmonic", "span(1, z + zbar/2) is not harmonic", "harmonic-check",
        {"bundle": _frame_entry(nonharmonic_fields()["mixed-line"].frame), "expect": {"harmonic": False}})
    for D in (2, 3, 4):
        for sig in alternating_sigmas(D + 1):
            tag = "".join(map(str, sig))
            add(f"osculating-{D}-sigma{tag}", f"Osculating flag of the degree-{D} curve with sigma {sig}",
                "twistor-verify", {"curve": veronese_curve(D).to_json(), "sigma": list(sig)})
    add("osculating-2-sigma1-violated", "Osculating flag of the conic is not holomorphic for sigma (1,)",
        "twistor-verify", {"curve": veronese_curve(2).to_json(), "sigma": [1], "expect": {"admissible": False}})
    for name, (f, kappa) in loop_catalog().items():
        add(f"birkhoff-{name}", f"Birkhoff factorisation of the {name} loop", "birkhoff",
            {"loop": _laurent_entry(f), "expect": {"kappa": list(kappa)}})
    pres = presented_catalog()
    for name in ("hol-tautological", "hol-mixed-degree", "veronese-2-E2", "veronese-3-E2", "veronese-4-E3"):
        E, _, sigma = pres[name]
        exp = {"sigma": list(sigma)}
        if name == "veronese-2-E2":
            exp["osculating_curve"] = veronese_curve(2).to_json()
        add(f"lift-{name}", f"Twistor lift of {name}", "lift", {"presented": _presented_entry(E), "expect": exp})
    for name, E in reduction_catalog().items():
        add(f"reduce-{name}", f"Length-reduction chain for {name}", "reduce-length",
            {"presented": _presented_entry(E), "max_steps": 4})
    add("hs-positive-half", "Truncated positive half: index 0", "hs-demo",
        {"family": "positive-half", "N_list": [8, 16, 32, 64], "expect": {"virtual_dimension": 0}})
    add("hs-bumped", "Positive half plus e_-1: index 1", "hs-demo",
        {"family": "bumped", "N_list": [8, 16, 32, 64], "expect": {"virtual_dimension": 1}})
    add("hs-geometric-tail", "Geometric mixing of e_-k into e_k: index 0, convergent tail", "hs-demo",
        {"family": "geometric-tail", "N_list": [16, 32, 64, 128], "expect": {"virtual_dimension": 0}})
    return out


def _laurent_entry(f: LaurentMatrix) -> dict:
    c = f.coef
    return {"low": f.low, "coef": np.stack([c.real, c.imag], axis=-1).tolist()}


def laurent_from_entry(entry: dict) -> LaurentMatrix:
    arr = np.asarray(entry["coef"], dtype=float)
    return LaurentMatrix(arr[..., 0] + 1j * arr[..., 1], int(entry["low"]))


def list_catalog() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _) in scenarios().items()]


def binomial_weights(D: int) -> list[float]:
    return [float(np.sqrt(comb(D, k))) for k in range(D + 1)]
