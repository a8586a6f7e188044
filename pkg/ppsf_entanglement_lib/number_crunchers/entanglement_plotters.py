"""
SVG figures for the experiment commands.

Figures are rendered with the Agg backend into an in-memory buffer and then
written atomically. A fixed svg.hashsalt and an empty Date entry keep the
output byte-stable for identical data.
"""

from io import BytesIO
from typing import Optional

import matplotlib
matplotlib.use(backend="Agg")  # Non-GUI backend, safe inside worker processes

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .photon_counting import PS, CoincidenceHistogram
from .polarization_state import BASIS_LABELS, PolarizationDensityMatrix
from .toolbox import atomic_write_bytes, tprint

SVG_HASHSALT = "ppsf-entanglement"


def _export_svg(fig, path: str) -> str:
    buf = BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT, "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_bytes(path, buf.getvalue())


def plot_spectrum(spectrum: pd.DataFrame, path: str, truth: Optional[pd.DataFrame] = None,
                  smoothed: Optional[np.ndarray] = None, fwhm_nm: Optional[float] = None) -> str:
    """
    Reconstructed biphoton spectrum with error bars, normalized to unit peak.

    Parameters:
      spectrum (pd.DataFrame): wavelength_nm, intensity, intensity_err.
      path (str): Output SVG path.
      truth (pd.DataFrame, optional): wavelength_nm, density of the model spectrum.
      smoothed (np.ndarray, optional): Smoothed intensity on the same axis.
      fwhm_nm (float, optional): Shown in the title.
    """
    x = spectrum["wavelength_nm"].to_numpy()
    y = spectrum["intensity"].to_numpy()
    scale = y.max() if y.max() > 0 else 1.0

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(x, y / scale, yerr=spectrum["intensity_err"].to_numpy() / scale, fmt=".", ms=2,
                lw=0.5, color="tab:blue", label="reconstructed")
    if smoothed is not None:
        ax.plot(x, smoothed / scale, color="tab:orange", lw=1.2, label="smoothed")
    if truth is not None:
        density = truth["density"].to_numpy()
        ax.plot(truth["wavelength_nm"], density / density.max(), color="black", lw=1.0, ls="--", label="model")
    ax.set_xlabel("Wavelength (nm)")
    ax.set_ylabel("Normalized intensity")
    title = "Biphoton spectrum"
    if fwhm_nm is not None:
        title += f" (FWHM {fwhm_nm:.1f} nm)"
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _export_svg(fig, path)


def plot_density_matrix(rho: PolarizationDensityMatrix, path: str, part: str = "real") -> str:
    """3-D bar chart of the real or imaginary part of a two-qubit density matrix."""
    if part == "real":
        values = rho.elements.real
    elif part == "imag":
        values = rho.elements.imag
    else:
        raise ValueError(f"part must be 'real' or 'imag' (got {part!r})")

    fig = plt.figure(figsize=(5, 4.5))
    ax = fig.add_subplot(111, projection="3d")
    xs, ys = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    heights = values.ravel()
    colors = np.where(heights >= 0, "tab:blue", "tab:red")
    ax.bar3d(xs.ravel() - 0.35, ys.ravel() - 0.35, np.zeros(16), 0.7, 0.7, heights, color=colors, shade=True)
    ax.set_xticks(range(4))
    ax.set_xticklabels(BASIS_LABELS)
    ax.set_yticks(range(4))
    ax.set_yticklabels(BASIS_LABELS)
    ax.set_zlim(-0.6, 0.6)
    ax.set_title(f"{'Re' if part == 'real' else 'Im'}(rho)")
    return _export_svg(fig, path)


def plot_car_timeseries(frame: pd.DataFrame, path: str) -> str:
    """CAR per batch against time, with the per-minute coincidence count on a twin axis."""
    fig, ax = plt.subplots(figsize=(7, 4))
    finite = np.isfinite(frame["car"].to_numpy())
    ax.errorbar(frame["time_h"][finite], frame["car"][finite], yerr=frame["car_err"][finite],
                fmt="o", ms=4, color="tab:blue", label="CAR")
    ax.set_xlabel("Time (h)")
    ax.set_ylabel("CAR")
    twin = ax.twinx()
    twin.plot(frame["time_h"], frame["coincidences_per_min"], "s--", ms=3, color="tab:gray", label="coincidences/min")
    twin.set_ylabel("Coincidences per minute")
    ax.set_title("Coincidence-to-accidental ratio")
    fig.tight_layout()
    if not finite.all():
        tprint(f"{int((~finite).sum())} batch(es) without accidentals left out of the CAR plot")
    return _export_svg(fig, path)


def plot_histogram(hist: CoincidenceHistogram, path: str) -> str:
    """Coincidence histogram against delay in ns."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(hist.delays / PS / 1000.0, hist.counts, where="mid", color="tab:blue", lw=0.8)
    ax.set_xlabel("Delay (ns)")
    ax.set_ylabel("Counts per bin")
    ax.set_yscale("symlog", linthresh=1.0)
    ax.set_title(f"Coincidence histogram ({hist.bin_width / PS:.0f} ps bins)")
    fig.tight_layout()
    return _export_svg(fig, path)


def plot_sweep(frame: pd.DataFrame, path: str) -> str:
    """Simulated and predicted CAR and coincidence rate against pump power."""
    fig, (ax_car, ax_rate) = plt.subplots(1, 2, figsize=(9, 4))
    finite = np.isfinite(frame["car"].to_numpy()) & np.isfinite(frame["car_err"].to_numpy())
    ax_car.errorbar(frame["power_mw"][finite], frame["car"][finite], yerr=frame["car_err"][finite],
                    fmt="o", color="tab:blue", label="simulated")
    ax_car.plot(frame["power_mw"], frame["car_predicted"], "-", color="black", lw=1.0, label="budget")
    ax_car.set_xscale("log")
    ax_car.set_yscale("log")
    ax_car.set_xlabel("Pump power (mW)")
    ax_car.set_ylabel("CAR")
    ax_car.legend(fontsize=8)

    ax_rate.plot(frame["power_mw"], frame["coincidence_rate"], "o", color="tab:green", label="simulated")
    ax_rate.plot(frame["power_mw"], frame["coincidence_rate_predicted"], "-", color="black", lw=1.0, label="budget")
    ax_rate.set_xlabel("Pump power (mW)")
    ax_rate.set_ylabel("Coincidences (1/s)")
    ax_rate.legend(fontsize=8)
    fig.tight_layout()
    return _export_svg(fig, path)
