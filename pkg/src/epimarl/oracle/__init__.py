from .checks import (
    CentralOuter,
    DistributedOuter,
    InnerSolution,
    InstanceReport,
    VerificationReport,
    dp_inner_value,
    exact_inner,
    exact_outer_central,
    exact_outer_distributed,
    premise_rejection_reason,
    recursion_identity_gap,
    run_verification,
    verify_instance,
    write_report,
)
from .tabular import (
    SequenceTable,
    TabularMAS,
    build_zgrid,
    decode_sequence,
    enumerate_sequences,
    generate_instance,
    sequence_trajectory,
)

__all__ = [
    "CentralOuter",
    "DistributedOuter",
    "InnerSolution",
    "InstanceReport",
    "VerificationReport",
    "dp_inner_value",
    "exact_inner",
    "exact_outer_central",
    "exact_outer_distributed",
    "premise_rejection_reason",
    "recursion_identity_gap",
    "run_verification",
    "verify_instance",
    "write_report",
    "SequenceTable",
    "TabularMAS",
    "build_zgrid",
    "decode_sequence",
    "enumerate_sequences",
    "generate_instance",
    "sequence_trajectory",
]
