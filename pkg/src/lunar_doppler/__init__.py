"""Doppler shift simulation and Gaussian mixture modelling for low lunar orbit links."""

__version__ = "0.1.0"

from .doppler import (DopplerSeries, GroundStation, doppler_hz, elevation_deg, gs_doppler_series,
                      gs_state, isl_doppler_series, ppm_from_range_rate, range_rate)
from .gmm import (ConstellationModel, EmConfig, FitTrace, GmmParams, e_step, fit_constellation,
                  fit_em, gmm_pdf, kmeans_pp_init, log_likelihood, m_step)
from .metrics import HistogramPdf, discretize_model, histogram_pdf, kl_divergence, wmrd
from .orbit import (Ephemeris, OrbitalElements, StateVector, elements_to_state, make_ephemeris,
                    propagate)
from .scenario import Scenario, build_links, default_scenario, load_scenario
