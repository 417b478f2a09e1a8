"""Engine flags shared by the explain and audit commands"""
from attribution.continuous_credit import QuadratureConfig
from attribution.engine import EngineConfig


def add_engine_arguments(parser):
    group = parser.add_argument_group('engine')
    group.add_argument('--tol', type=float, default=None, help="efficiency tolerance (GIG_EFFICIENCY_TOL)")
    group.add_argument('--delta', type=float, default=None, help="override the corner probe step")
    group.add_argument('--max-radix', type=int, default=None, help="largest corner radix (GIG_K_MAX)")
    group.add_argument('--quad-nodes', type=int, default=None, help="Gauss-Legendre nodes per panel")
    group.add_argument('--quad-panels', dest='panels', type=int, default=None, help="initial panels per segment")
    group.add_argument('--quad-tol', type=float, default=None, help="adaptive refinement tolerance")
    refine = group.add_mutually_exclusive_group()
    refine.add_argument('--quad-refine', dest='refine', action='store_true', default=None,
                        help="always refine panels adaptively")
    refine.add_argument('--no-quad-refine', dest='refine', action='store_false',
                        help="never refine (default: refine when the model has curves)")


def engine_config(options) -> EngineConfig:
    quadrature = QuadratureConfig.from_settings(
        nodes_per_panel=options.get('quad_nodes'),
        panels=options.get('panels'),
        refine_tol=options.get('quad_tol'),
        refine=options.get('refine'),
    )
    return EngineConfig.from_settings(
        quadrature,
        efficiency_tol=options.get('tol'),
        delta_override=options.get('delta'),
        max_radix=options.get('max_radix'),
    )
