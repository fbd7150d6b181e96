#![allow(clippy::excessive_precision)]

// Upper-tail chi-square probabilities evaluated with 40-digit arithmetic
// (mpmath regularized incomplete gamma).
pub const CHI2_SF: [(f64, f64, f64); 20] = [
    (0.1, 1.0, 0.75182963404584927583),
    (0.5, 1.0, 0.47950012218695346232),
    (3.84, 1.0, 0.050043521248705103189),
    (10.0, 1.0, 0.0015654022580025496775),
    (1.0, 2.0, 0.6065306597126334236),
    (5.99, 2.0, 0.050036627086586282516),
    (0.753, 5.0, 0.9799338014015240896),
    (1.032, 5.0, 0.95994367781891795544),
    (11.07, 5.0, 0.050009618622405482225),
    (20.0, 5.0, 0.0012497305630313754119),
    (3.0, 10.0, 0.9814240637778593257),
    (18.3, 10.0, 0.050109061411462451593),
    (45.96, 50.0, 0.63616872605255147241),
    (50.0, 50.0, 0.47339846855634935672),
    (30.0, 50.0, 0.98883521972844971642),
    (80.0, 50.0, 0.0044826565655732045619),
    (10.14, 7.0, 0.18077765234709008101),
    (100.0, 80.0, 0.064570368921132975762),
    (150.0, 100.0, 0.00090393204235400908576),
    (0.01, 3.0, 0.99973483494134439016),
];
