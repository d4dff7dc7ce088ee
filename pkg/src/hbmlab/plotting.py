"""Matplotlib figures written next to command line reports."""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_spectrum(report: dict, path):
    """Eigenvalues against their index, distinct levels marked."""
    lam = np.asarray(report["eigenvalues"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(np.arange(lam.size), lam, "o", ms=4)
    ax.axhline(report["lambda2"], color="C3", lw=0.8, ls="--", label=r"$\lambda_2$")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title(f"spectrum, n={report['dim']}, L={report['lmax']}")
    ax.legend(loc="upper left")
    return _save(fig, path)


def plot_classification(result: dict, path):
    """Half-period map with the closing levels pi/k, and the found curves."""
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    a, T = result["time_map"]["a"], result["time_map"]["T"]
    ax.semilogx(a, T, ".", ms=2, color="k")
    for k in range(3, math.ceil(math.sqrt(2.0 - result["p"])) + 2):
        ax.axhline(math.pi / k, lw=0.7, color="C0" if k in result["predicted"] else "C7", ls="--")
        ax.text(a[-1], math.pi / k, f" k={k}", va="center", fontsize=8)
    ax.set_xlabel("h(0)")
    ax.set_ylabel("half period T")
    ax.set_title(f"p = {result['p']:g}")
    theta = np.linspace(0, 2 * np.pi, 721)
    ax2.plot(np.cos(theta), np.sin(theta), color="C7", lw=0.8, label="circle")
    for k, sols in result["solutions"].items():
        for s in sols:
            h, dh = _full_profile(s, theta)
            X = h * np.cos(theta) - dh * np.sin(theta)
            Y = h * np.sin(theta) + dh * np.cos(theta)
            ax2.plot(X, Y, lw=1.2, label=f"k={k}")
    ax2.set_aspect("equal")
    ax2.legend(fontsize=8)
    ax2.set_title("solution curves")
    return _save(fig, path)


def _full_profile(sol, theta):
    """Evaluate a k-fold profile (and slope) at arbitrary angles by reflection."""
    half = math.pi / sol.k
    t = np.mod(theta, 2 * half)
    refl = t > half
    t = np.where(refl, 2 * half - t, t)
    h = np.interp(t, sol.theta, sol.profile)
    dh = np.interp(t, sol.theta, sol.slope) * np.where(refl, -1.0, 1.0)
    return h, dh


def plot_newton(history, path, title="Newton residual"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(np.arange(len(history)), np.maximum(history, 1e-300), "o-")
    ax.set_xlabel("iteration")
    ax.set_ylabel("Galerkin residual")
    ax.set_title(title)
    return _save(fig, path)


def plot_boundaries(bodies, labels, path):
    """Planar boundary curves X_K, or for n = 3 the support function on the equator."""
    from .body_geometry import gauss_map_inverse

    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for K, lab in zip(bodies, labels):
        if K.n == 2:
            X = gauss_map_inverse(K)
            ang = np.arctan2(K.domain.nodes[:, 1], K.domain.nodes[:, 0])
            order = np.argsort(ang)
            X = X[order]
            ax.plot(np.append(X[:, 0], X[0, 0]), np.append(X[:, 1], X[0, 1]), label=lab)
        else:
            phi = np.linspace(0, 2 * np.pi, 361)
            pts = np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=1)
            h = K.domain.basis_at(pts) @ K.coeffs
            ax.plot(h * np.cos(phi), h * np.sin(phi), label=f"{lab} (equator support)")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_corpus(rows, path):
    """Relative residuals (lhs - rhs)/scale per inequality on a log scale."""
    groups = defaultdict(list)
    for r in rows:
        scale = max(abs(r["lhs"]), abs(r["rhs"]), 1.0)
        groups[r["name"]].append(r["residual"] / scale)
    names = sorted(groups)
    fig, ax = plt.subplots(figsize=(7, 0.4 * len(names) + 1.5))
    for i, name in enumerate(names):
        v = np.asarray(groups[name])
        for mask, color in ((v >= 0, "C0"), (v < 0, "C3")):
            if mask.any():
                ax.plot(np.maximum(np.abs(v[mask]), 1e-17), np.full(mask.sum(), i), "|",
                        ms=8, color=color)
    ax.set_xscale("log")
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_xlabel("|residual| / scale (red: negative)")
    return _save(fig, path)


def plot_check(reports, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x = np.arange(len(reports))
    ax.bar(x - 0.2, [r.lhs for r in reports], 0.4, label="lhs")
    ax.bar(x + 0.2, [r.rhs for r in reports], 0.4, label="rhs")
    ax.set_xticks(x, [r.name for r in reports], rotation=20, fontsize=8)
    ax.legend()
    return _save(fig, path)
