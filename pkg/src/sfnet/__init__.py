"""Ship-borne species flow networks.

Estimate per-voyage species-introduction probabilities from shipping
records, aggregate them into a directed Species Flow Network, decompose
the network into flow modules with a two-level map-equation optimizer,
rank pairwise invasion risk from environmental tolerances and ecoregion
adjacency, and evaluate edge-removal management scenarios.
"""

from .ballast import DischargeModel, LinearFit, fit_discharge_models, predict_discharge
from .config import PipelineConfig, config_hash, format_config, load_config, parse_config
from .ingest import (DischargeEvent, EcoregionAdjacency, PortRecord, SyntheticSpec,
                     VoyageLeg, derive_legs, generate_synthetic, load_adjacency,
                     load_discharges, load_ports, load_voyages)
from .mapeq import (Partition, VisitDistribution, cluster_undirected, codelength,
                    optimize, optimize_restarts, stationary_flow)
from .risk import (RiskNetwork, ToleranceGroup, build_risk_network,
                   non_indigenous_pair, risk_level, sub_cluster)
from .sfn import (SpeciesFlowNetwork, aggregate_edge_weight, build_sfn,
                  calibrate_lambda, degree_distribution, introduction_probability,
                  network_stats)
from .analytics import (flow_report, match_clusters, remove_edges,
                        remove_top_degree, top_inter_cluster_edges,
                        vessel_type_stats)

__version__ = "0.1.0"

__all__ = [
    "DischargeEvent", "DischargeModel", "EcoregionAdjacency", "LinearFit",
    "Partition", "PipelineConfig", "PortRecord", "RiskNetwork",
    "SpeciesFlowNetwork", "SyntheticSpec", "ToleranceGroup", "VisitDistribution",
    "VoyageLeg", "aggregate_edge_weight", "build_risk_network", "build_sfn",
    "calibrate_lambda", "cluster_undirected", "codelength", "config_hash",
    "degree_distribution", "derive_legs", "fit_discharge_models", "flow_report",
    "format_config", "generate_synthetic", "introduction_probability",
    "load_adjacency", "load_config", "load_discharges", "load_ports",
    "load_voyages", "match_clusters", "network_stats", "non_indigenous_pair",
    "optimize", "optimize_restarts", "parse_config", "predict_discharge",
    "remove_edges", "remove_top_degree", "risk_level", "stationary_flow",
    "sub_cluster", "top_inter_cluster_edges", "vessel_type_stats",
]
