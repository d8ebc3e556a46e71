"""Frozen reference values, computed independently of the package code.

Bianchi points use the closed form for a single backoff stage
(tau = 2 / (W + 1), p = 1 - (1 - tau)^(n-1)) with the default timing at
120 Mbps: data PPDU 121 us, Ts = 203 us, Tc = 212 us (DIFS included).
"""

import math

DATA_121 = 121  # 20 us preamble + ceil((1472 + 36) * 8 / 120)
TS_BASIC = 203
TC_BASIC = 212

# (n, cw) -> (tau, p, normalized throughput)
BIANCHI = {
    (5, 31): (0.06060606060606061, 0.2212626304787585, 0.3773236704357346),
    (10, 31): (0.06060606060606061, 0.43032155723167453, 0.33794726979818573),
    (5, 127): (0.015503875968992248, 0.060588131754992225, 0.3028029500940329),
    (10, 127): (0.015503875968992248, 0.13118742952444862, 0.35578468138818004),
}

BETAS_3000_1000 = (math.exp(0.75) / (math.exp(0.75) + math.exp(0.25)),
                   math.exp(0.25) / (math.exp(0.75) + math.exp(0.25)))
BETAS_3000_1000_ROUNDED = (0.6225, 0.3775)

ARRIVALS_10MBPS_1S = 849  # floor(10e6 / (8 * 1472))
P_ERR_MID = 0.045  # 0.01 + 0.14 * 0.25 at d = 15.25 m
SCORE_D15_PLR02 = 0.65
