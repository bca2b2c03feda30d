"""Markov chain analytics for limit order price changes.

Thin wrapper over the compiled extension; see the package README for the
state definitions and the CLI that drives full pipeline runs.
"""

from lobmc._core import (  # noqa: F401
    N_STATES,
    __version__,
    acf,
    assign_interval,
    build_sequence,
    chain_metrics,
    chi2_sf,
    classify,
    classify_letter,
    count_transitions,
    cut_clusters,
    dbscan,
    eigen_moduli,
    estimate_tpm,
    g_test,
    jsd,
    jsd_matrix,
    kld,
    mean_recurrence,
    pca_fit,
    pct_change,
    plant_tpm,
    simulate,
    state_histogram,
    stationary,
    tsne,
    vectorize,
    ward_cluster,
)

__all__ = [
    "N_STATES",
    "acf",
    "assign_interval",
    "build_sequence",
    "chain_metrics",
    "chi2_sf",
    "classify",
    "classify_letter",
    "count_transitions",
    "cut_clusters",
    "dbscan",
    "eigen_moduli",
    "estimate_tpm",
    "g_test",
    "jsd",
    "jsd_matrix",
    "kld",
    "mean_recurrence",
    "pca_fit",
    "pct_change",
    "plant_tpm",
    "simulate",
    "state_histogram",
    "stationary",
    "tsne",
    "vectorize",
    "ward_cluster",
]
