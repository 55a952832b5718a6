"""curvenet: feature curve network extraction from noisy, incomplete point clouds."""

from .cloud import (PointCloud, NeighborhoodStats, FeaturePointSet,
                    load_point_cloud, save_ply, save_xyz,
                    neighborhood, surface_variation, all_variations,
                    detect_feature_points)
from .extract import (CurveSegment, GrowthParams, ExtractionStats,
                      grow_polyline, extract_segments, SegmentTooShortError)
from .regularity import (RegularityLabel, SymmetryPlane, classify_line, classify_circle,
                         detect_groups_and_pairs, fit_symmetry_plane, mirror_curve,
                         complete_by_symmetry)
from .optimize import (OptimizationProblem, EnergyBreakdown, Weights, default_weights,
                       alignment_targets, build_problem, energy_and_gradient, optimize)
from .network import (CurveNetwork, EndpointDescriptor, Junction,
                      endpoint_tangent, solve_corner, extend_to_interior,
                      connection_cost, complete_network)
from .synthetic import SyntheticSpec, Wireframe, generate_synthetic
from .metrics import network_metrics
from .pipeline import PipelineConfig, run_pipeline

__version__ = "0.1.0"
