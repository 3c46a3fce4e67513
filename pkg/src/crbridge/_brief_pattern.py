"""Fixed BRIEF sampling pattern: 256 point pairs (x1, y1, x2, y2).

Drawn once from an isotropic Gaussian (sigma 6.6 px, rounded to integers)
and restricted to the radius-15 disc, so any rotation stays inside a
31x31 patch.
"""

PATTERN = (
    (6, 7, 5, 3), (0, -7, 9, 1), (9, -1, -9, -5), (7, -2, 1, -7),
    (11, -6, 5, 5), (-2, 0, 6, -4), (-5, -7, 13, -2), (-10, 6, -14, -2),
    (-4, 0, 5, 2), (10, 0, -6, 11), (-6, -7, -3, -7), (0, 5, -5, 8),
    (2, -6, -4, 9), (6, 5, -3, -3), (-2, -6, -9, 5), (-1, 3, 1, -12),
    (0, -3, 7, 6), (4, 0, -7, 8), (-1, 1, -7, 1), (-1, -3, 7, -7),
    (13, 2, 5, 0), (2, -3, 6, 7), (1, -1, -3, -1), (0, -8, 0, 3),
    (-4, 0, 0, 0), (-7, -4, 6, 8), (0, -2, -4, 7), (-5, 1, 4, 1),
    (4, -3, 3, -2), (-6, -3, 4, 1), (12, -7, 2, -4), (-4, 10, 3, -3),
    (-9, -4, -9, 1), (-7, 4, 5, 10), (-4, 2, 6, 6), (4, 5, 1, -7),
    (-4, 4, 1, -4), (6, -9, 5, 0), (7, -9, 2, 6), (-5, 10, -2, 6),
    (0, -2, 0, -1), (-1, 0, 2, -9), (-10, 5, -8, -5), (0, -5, -2, 5),
    (-4, 6, 1, 5), (-12, 3, -6, 4), (8, 2, 0, -7), (0, 5, -3, -5),
    (0, -8, 8, -2), (-9, -7, -7, -8), (2, -2, -1, 2), (-1, -5, 1, 0),
    (2, -3, -12, 1), (-4, -2, -14, 4), (-10, -5, 0, 7), (-1, 4, -5, -1),
    (-2, -3, -9, 0), (4, -6, 13, -4), (6, 5, 7, -2), (0, -3, -3, 0),
    (-3, 3, 0, 10), (-11, -4, 0, -6), (-4, -12, 3, -2), (1, -3, 6, 4),
    (-6, 3, -4, 0), (1, 8, 9, -4), (2, 0, 4, 4), (-6, 6, -6, 2),
    (-6, 5, -4, -10), (4, -2, -4, 6), (-1, 6, -10, -8), (-5, 0, -9, -1),
    (-10, 2, -8, 5), (7, -3, -7, 4), (-6, -11, 2, -4), (-2, 7, -8, -1),
    (-10, -9, -10, 7), (-6, -10, 7, 11), (2, -4, 0, 1), (4, -5, -12, 9),
    (0, -14, 1, 0), (7, 6, 12, -9), (1, 11, 14, -3), (3, 11, 4, -7),
    (-1, 2, -2, 3), (4, 9, 5, -3), (-1, -2, -7, -10), (6, 11, 2, 8),
    (14, 3, -3, 2), (2, 8, 0, 9), (-6, 12, -4, 3), (4, 0, -4, -8),
    (-3, 0, 8, 8), (-6, 12, -10, 3), (-6, 4, -4, 0), (5, -2, -3, -6),
    (2, 4, 0, -9), (-5, 10, -10, 11), (-4, 1, 5, -2), (-11, -6, 4, -3),
    (11, 3, 0, 1), (1, -10, -12, 3), (-8, -5, -6, -6), (-5, -2, -2, -10),
    (-14, -1, -11, -4), (8, 7, 6, 2), (0, 0, 2, 3), (4, -6, 2, 7),
    (3, 1, 14, -1), (-11, 2, -1, 7), (-1, 6, -5, -3), (1, 6, 5, -2),
    (2, 1, 2, -1), (4, 8, 8, 11), (-14, -5, -8, 8), (-10, -1, -1, 4),
    (-5, 9, -3, -13), (-1, 1, 0, -3), (-2, -12, -3, -1), (-1, 2, 6, -10),
    (-7, 7, -8, -4), (6, 5, 0, 13), (8, -11, 7, 0), (0, -3, 8, -3),
    (10, 1, 0, 9), (9, -4, 1, 2), (-3, -2, -10, 5), (-4, -5, 2, -3),
    (-4, 5, 5, 1), (-4, 3, -2, -5), (0, 4, 4, 8), (2, 4, 5, 0),
    (-3, -13, -2, -2), (3, 0, 2, -5), (-1, 1, -7, -5), (-4, 6, 7, -1),
    (3, -12, -5, -1), (4, -1, 6, 0), (6, 1, 3, -6), (-8, -5, 1, -7),
    (7, -3, -3, -6), (0, 0, 2, 6), (-1, -6, 11, 6), (-4, -3, 4, 9),
    (2, 5, -1, -8), (2, 9, -2, 2), (7, 0, -4, -5), (-9, 5, -8, 12),
    (1, 6, -1, 6), (-10, 3, -5, 8), (7, -1, 2, -2), (9, 2, 2, -3),
    (1, -7, 0, -8), (6, -4, 5, 9), (-1, -5, 3, 9), (-11, 7, 0, -6),
    (8, 1, 7, -3), (1, 8, -1, -4), (0, 3, -3, -4), (-7, 5, 2, 9),
    (-1, 8, 1, -9), (-4, -1, -6, 2), (10, -8, 4, 2), (-1, -5, 0, -6),
    (4, 9, 1, 2), (-2, 3, -1, 7), (5, -2, -8, 4), (1, -4, -11, -5),
    (8, 3, 1, 4), (1, -5, -11, -5), (-5, 11, -3, 8), (4, -9, -11, 1),
    (-5, 1, 5, 5), (3, 4, -6, -3), (7, -7, -4, 3), (1, 2, 7, -1),
    (2, -3, 5, -1), (-11, 7, -8, -1), (-1, -9, 0, 2), (7, -10, -2, -10),
    (-7, -4, -12, 1), (12, -2, -12, 5), (-6, 1, -7, -5), (-2, 11, 2, 9),
    (-1, -1, 0, -6), (-6, 1, -8, 9), (4, 13, 6, -11), (-13, -3, 4, 3),
    (3, -4, 7, 0), (7, 4, -6, 10), (11, -4, -4, -2), (10, -4, 1, -3),
    (-1, 3, 3, -2), (-9, 6, -12, -5), (-2, 4, -3, -3), (2, 10, -3, -6),
    (-13, -1, 2, 7), (4, 0, -5, 0), (2, 9, 2, 1), (6, -1, -2, -4),
    (-4, 11, 6, -4), (9, 2, 0, 1), (2, -12, -12, -9), (9, 7, 7, -2),
    (1, 0, -1, -1), (-10, 11, -2, -6), (3, -10, 1, 11), (0, 9, 11, 0),
    (2, -6, -3, -7), (-7, 2, -2, 4), (-6, -6, 2, 6), (4, 6, 11, 2),
    (1, -10, 5, 6), (3, -6, 5, -2), (2, 2, -11, 2), (6, -4, -4, -3),
    (10, 5, 4, -3), (1, -6, 6, 2), (6, -4, -4, 7), (0, 15, -10, 3),
    (2, 2, 8, 7), (-2, -1, 8, -3), (0, 2, 3, -7), (5, -4, -2, -5),
    (-1, 5, 1, -6), (1, 7, -6, 10), (-3, -2, 0, -4), (3, 2, -4, -2),
    (-5, -5, -1, -5), (1, -5, -1, -12), (-6, 3, -11, -7), (-3, -1, 14, -3),
    (-1, 4, -3, 9), (9, -1, 3, -1), (8, 8, -2, -1), (10, -3, 10, 4),
    (-13, -7, 2, 11), (8, 8, -10, 0), (-5, -4, 1, -1), (5, 2, -5, 12),
    (1, -2, 2, -8), (2, -5, -9, -3), (-5, -3, -11, -3), (4, 3, 0, 5),
    (-4, 1, 3, 11), (14, 5, -4, -5), (-2, -6, -2, -2), (-5, 0, 3, 0),
    (-5, -1, 3, 0), (4, 2, -4, 0), (-7, 0, 0, -9), (3, -7, -3, -4),
    (3, 4, 8, 1), (4, 9, -8, -1), (8, 0, -7, 2), (-8, 5, -3, 2),
)
