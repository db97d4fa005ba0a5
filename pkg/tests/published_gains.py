"""Published per-scenario discounted gains across 11 production incidents
(None = failure), plus the printed summary rows they should reproduce."""

GAINS = {
    "CorrMean": [0.167, 0.143, 1.000, None, None, None, None, None, 0.050, None, 0.333],
    "CorrMax": [1.000, 0.071, 1.000, None, 1.000, None, 0.111, 1.000, 0.053, 0.500, 0.083],
    "L2": [0.143, None, 0.200, 0.333, 0.100, 0.333, 1.000, 0.250, 0.500, 1.000, None],
    "L2-P50": [1.000, 0.077, 1.000, 0.167, 1.000, 0.167, None, 1.000, 0.062, 0.333, None],
    "L2-P500": [0.333, None, 1.000, 0.333, 0.077, 0.500, 0.200, 1.000, 0.250, 0.250, None],
}

PRINTED_HARMONIC = {
    "CorrMean": 0.002,
    "CorrMax": 0.004,
    "L2": 0.009,
    "L2-P50": 0.009,
    "L2-P500": 0.009,
}

PRINTED_AVERAGE = {
    "CorrMean": 0.154,
    "CorrMax": 0.438,
    "L2": 0.351,
    "L2-P50": 0.437,
    "L2-P500": 0.359,
}

PRINTED_STDEV = {
    "CorrMean": 0.300,
    "CorrMax": 0.465,
    "L2": 0.353,
    "L2-P50": 0.456,
    "L2-P500": 0.350,
}

# percentages of scenarios with a cause in the top k
PRINTED_SUCCESS = {
    5: {"CorrMean": 19, "CorrMax": 46, "L2": 64, "L2-P50": 46, "L2-P500": 73},
    10: {"CorrMean": 37, "CorrMax": 55, "L2": 82, "L2-P50": 64, "L2-P500": 73},
    20: {"CorrMean": 46, "CorrMax": 82, "L2": 82, "L2-P50": 82, "L2-P500": 82},
}
