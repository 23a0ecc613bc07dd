"""NR downlink MCS table (3GPP TS 38.214, Table 5.1.3.1-2, 256QAM).

Indices 0-27 are valid data entries; 28-31 are reserved and rejected.
Spectral efficiency is bits per resource element as published (modulation
order times code rate, rounded to four decimals).
"""

from typing import NamedTuple


class McsEntry(NamedTuple):
    index: int
    modulation_order: int  # bits per symbol
    code_rate_x1024: float
    spectral_efficiency: float  # bits per resource element


_ROWS = (
    (0, 2, 120, 0.2344),
    (1, 2, 193, 0.3770),
    (2, 2, 308, 0.6016),
    (3, 2, 449, 0.8770),
    (4, 2, 602, 1.1758),
    (5, 4, 378, 1.4766),
    (6, 4, 434, 1.6953),
    (7, 4, 490, 1.9141),
    (8, 4, 553, 2.1602),
    (9, 4, 616, 2.4063),
    (10, 4, 658, 2.5703),
    (11, 6, 466, 2.7305),
    (12, 6, 517, 3.0293),
    (13, 6, 567, 3.3223),
    (14, 6, 616, 3.6094),
    (15, 6, 666, 3.9023),
    (16, 6, 719, 4.2129),
    (17, 6, 772, 4.5234),
    (18, 6, 822, 4.8164),
    (19, 6, 873, 5.1152),
    (20, 8, 682.5, 5.3320),
    (21, 8, 711, 5.5547),
    (22, 8, 754, 5.8906),
    (23, 8, 797, 6.2266),
    (24, 8, 841, 6.5703),
    (25, 8, 885, 6.9141),
    (26, 8, 916.5, 7.1602),
    (27, 8, 948, 7.4063),
)

MCS_TABLE = tuple(McsEntry(*row) for row in _ROWS)
N_VALID_MCS = len(MCS_TABLE)  # 28
MAX_SPECTRAL_EFFICIENCY = MCS_TABLE[-1].spectral_efficiency  # 7.4063


def mcs_entry(index: int) -> McsEntry:
    """Table row for a valid MCS index; reserved/out-of-range indices are rejected."""
    if not 0 <= index < N_VALID_MCS:
        raise ValueError(f"MCS index {index} invalid (valid data entries are 0..{N_VALID_MCS - 1})")
    return MCS_TABLE[index]


def spectral_efficiency(index: int) -> float:
    return mcs_entry(index).spectral_efficiency
