// Measured rounds-to-convergence and energy (Wh) per participation probability.

/// One seed per probability: `(p, energy_wh, rounds)`.
pub(super) const SINGLE_SEED: [(f64, f64, f64); 42] = [
    (0.100, 1056.81, 74.0),
    (0.125, 1060.25, 73.0),
    (0.130, 830.90, 57.0),
    (0.150, 1073.33, 73.0),
    (0.160, 962.90, 65.0),
    (0.175, 600.42, 40.0),
    (0.200, 861.87, 57.0),
    (0.225, 691.04, 45.0),
    (0.250, 638.27, 41.0),
    (0.300, 720.66, 45.0),
    (0.350, 641.78, 39.0),
    (0.400, 691.90, 41.0),
    (0.410, 811.87, 48.0),
    (0.420, 647.21, 38.0),
    (0.430, 736.57, 43.0),
    (0.440, 686.69, 40.0),
    (0.450, 827.07, 48.0),
    (0.460, 884.16, 51.0),
    (0.470, 698.03, 40.0),
    (0.480, 700.97, 40.0),
    (0.490, 686.84, 39.0),
    (0.500, 689.25, 39.0),
    (0.510, 656.18, 37.0),
    (0.520, 660.68, 37.0),
    (0.530, 663.44, 37.0),
    (0.540, 702.24, 39.0),
    (0.550, 741.38, 41.0),
    (0.560, 781.14, 43.0),
    (0.570, 692.42, 38.0),
    (0.580, 659.89, 36.0),
    (0.590, 662.56, 36.0),
    (0.600, 627.10, 34.0),
    (0.610, 666.57, 36.0),
    (0.620, 707.24, 38.0),
    (0.630, 804.00, 43.0),
    (0.640, 865.10, 46.0),
    (0.650, 716.03, 38.0),
    (0.660, 698.39, 37.0),
    (0.670, 816.24, 43.0),
    (0.680, 724.07, 38.0),
    (0.690, 612.04, 32.0),
    (0.700, 711.64, 37.0),
];

/// Averaged over seeds: `(p, rounds_mean, rounds_std, energy_mean_wh, energy_std_wh)`.
pub(super) const AVERAGED: [(f64, f64, f64, f64, f64); 42] = [
    (0.100, 74.50, 11.47, 1072.14, 123.43),
    (0.125, 68.00, 13.09, 1005.97, 140.49),
    (0.130, 56.00, 5.29, 862.84, 60.19),
    (0.150, 62.50, 8.81, 950.26, 100.14),
    (0.160, 57.25, 6.13, 887.80, 61.31),
    (0.175, 51.00, 9.42, 797.18, 145.67),
    (0.200, 51.00, 4.55, 816.96, 37.86),
    (0.225, 45.50, 3.70, 747.44, 54.52),
    (0.250, 51.00, 9.56, 803.96, 132.64),
    (0.300, 46.75, 2.75, 768.25, 41.50),
    (0.350, 43.00, 5.23, 724.40, 73.21),
    (0.400, 43.25, 2.22, 734.25, 33.22),
    (0.410, 44.50, 5.32, 758.88, 62.29),
    (0.420, 42.75, 4.11, 725.76, 59.45),
    (0.430, 42.75, 3.30, 734.69, 35.41),
    (0.440, 43.00, 4.08, 732.95, 49.07),
    (0.450, 43.50, 4.43, 751.96, 61.11),
    (0.460, 42.75, 5.56, 750.14, 89.77),
    (0.470, 39.50, 3.11, 698.25, 33.15),
    (0.480, 39.25, 6.70, 696.30, 71.74),
    (0.490, 40.67, 2.89, 709.99, 33.48),
    (0.500, 40.00, 0.82, 704.10, 11.11),
    (0.510, 41.75, 3.30, 719.96, 43.71),
    (0.520, 42.50, 7.33, 729.13, 81.90),
    (0.530, 40.00, 3.16, 703.01, 37.23),
    (0.540, 41.75, 4.27, 726.11, 44.34),
    (0.550, 39.50, 2.65, 706.41, 35.12),
    (0.560, 40.25, 2.99, 719.03, 48.51),
    (0.570, 40.50, 4.43, 712.93, 46.15),
    (0.580, 46.25, 14.15, 771.83, 152.41),
    (0.590, 39.00, 2.58, 694.74, 27.70),
    (0.600, 39.00, 4.24, 691.24, 51.19),
    (0.610, 37.75, 2.87, 682.34, 30.05),
    (0.620, 39.75, 5.56, 708.59, 58.31),
    (0.630, 37.75, 3.50, 697.93, 70.71),
    (0.640, 39.75, 5.91, 726.61, 102.68),
    (0.650, 39.00, 2.16, 702.75, 23.75),
    (0.660, 40.75, 4.99, 719.79, 48.48),
    (0.670, 40.00, 4.69, 725.12, 75.90),
    (0.680, 41.25, 4.03, 728.89, 36.60),
    (0.690, 37.50, 3.87, 676.75, 45.17),
    (0.700, 38.25, 5.50, 696.29, 59.19),
];
