"""Layered cyber-insurance pricing.

Describe an organization in three layers, assess each layer against a
security maturity model, and price each layer by expected-utility
indifference. Claims are adjusted against the adjuster's re-assessment.
"""

from .claims import Claim, Settlement, adjust_losses, settle, settlement_ratio
from .erd import export_dot, parse_org, serialize_org
from .errors import (
    CoverageConstraintError,
    CyberQuoteError,
    Diagnostic,
    FormatError,
    ModelValidationError,
    NumericalError,
    ParseError,
    UninsurableLayerError,
    UnknownEntityError,
    UnknownPracticeError,
)
from .maturity import (
    LayerAssessment,
    MaturityModelSpec,
    MuRecord,
    PracticeStatus,
    level_achieved,
    load_assessment,
    load_maturity_model,
    mu,
    objective_score,
    practice_score,
)
from .org import EntityNode, Layer, OrgModel, RelationshipEdge, ZoneAssignment, validate_model
from .pricing import (
    LayerEconomics,
    Quote,
    Scenario,
    UtilitySpec,
    breach_probability,
    expected_loss,
    indifference_premium,
    layer_loss,
    price_layer,
    quote,
)
from .sim import DistributionSpec, PortfolioMember, PortfolioSpec, SimConfig, SimResult

__version__ = "0.1.0"
