"""Named run presets: the full-scale experiment grid plus scaled-down variants.

Full-scale presets match the published training budgets (hundreds of
thousands of epochs; slow). The ``*-scaled`` presets are the quick settings
used by the acceptance suite. Any preset field can still be overridden by a
flag.
"""

from __future__ import annotations

EPS_SIXTEENTH = 0.1 / 16.0
EPS_QUARTER = 0.1 / 4.0


def _spec(problem, layers, width, activation, epochs, fourier_i=None, eps=0.0,
          sampling=None, rho=0.1):
    return {
        "problem": problem,
        "layers": layers,
        "width": width,
        "activation": activation,
        "rho": rho,
        "fourier_i": fourier_i,
        "epochs": epochs,
        "eps": eps,
        "sampling": sampling if sampling else ("fixed" if problem.startswith("twin2d") else "resample"),
    }


def _build() -> dict[str, dict]:
    p: dict[str, dict] = {}

    # 1D double well: depth scan without features, frequency scan with them.
    for depth in (5, 7, 9):
        p[f"dw1d-depth{depth}"] = _spec("dw1d", depth, 128, "relu", 100_000)
    for i in (2, 3, 4):
        p[f"dw1d-ff{i}"] = _spec("dw1d", 5, 128, "relu", 100_000, fourier_i=i)

    # 1D double well with the lower-order term.
    for depth in (3, 5, 7):
        p[f"dw1d-lower-depth{depth}"] = _spec("dw1d-lower", depth, 128, "relu", 200_000)
    for i in (1, 2, 3):
        p[f"dw1d-lower-ff{i}"] = _spec("dw1d-lower", 3, 128, "relu", 200_000, fourier_i=i)

    # 2D twin branching, plain and regularized.
    for depth in (3, 5, 7):
        p[f"twin2d-depth{depth}"] = _spec("twin2d", depth, 128, "smoothsqrt", 300_000)
    for i in (1, 2, 3, 4):
        p[f"twin2d-ff{i}"] = _spec("twin2d", 3, 128, "smoothsqrt", 300_000, fourier_i=i)
    for name, eps in (("reg16", EPS_SIXTEENTH), ("reg4", EPS_QUARTER)):
        p[f"twin2d-{name}-plain"] = _spec("twin2d-reg", 3, 128, "smoothsqrt", 300_000, eps=eps)
        for i in (1, 2, 3, 4):
            p[f"twin2d-{name}-ff{i}"] = _spec("twin2d-reg", 3, 128, "smoothsqrt", 300_000,
                                              fourier_i=i, eps=eps)

    # Scaled settings used by the acceptance suite.
    p["dw1d-depth5-scaled"] = _spec("dw1d", 5, 128, "relu", 20_000)
    for i in (2, 3):
        p[f"dw1d-ff{i}-scaled"] = _spec("dw1d", 3, 128, "relu", 50_000, fourier_i=i)
    for depth in (3, 5, 7):
        p[f"dw1d-depth{depth}-scaled50k"] = _spec("dw1d", depth, 128, "relu", 50_000)
        p[f"dw1d-lower-depth{depth}-scaled"] = _spec("dw1d-lower", depth, 128, "relu", 50_000)
    for i in (2, 3, 4):
        p[f"twin2d-ff{i}-scaled"] = _spec("twin2d", 3, 64, "smoothsqrt", 30_000, fourier_i=i)
    for i in (3, 4):
        p[f"twin2d-reg4-ff{i}-scaled"] = _spec("twin2d-reg", 3, 64, "smoothsqrt", 30_000,
                                               fourier_i=i, eps=EPS_QUARTER)
    return p


PRESETS = _build()
