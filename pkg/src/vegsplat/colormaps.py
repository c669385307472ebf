"""Embedded color tables for the named colormaps.

Each table is a tuple of (t, r, g, b) control points covering [0, 1];
the curvier maps carry 33 adaptively placed points so linear interpolation
stays within 1/255 of the full-resolution reference tables they were
sampled from.  Derived maps (reversed, pale, grayscale) are built from the
base tables.
"""

from __future__ import annotations

from .transfer import ColorMap


_VIRIDIS = (
    (0.00000, 0.2670, 0.0049, 0.3294),
    (0.02745, 0.2760, 0.0442, 0.3702),
    (0.05882, 0.2819, 0.0897, 0.4124),
    (0.08627, 0.2832, 0.1258, 0.4450),
    (0.11373, 0.2809, 0.1608, 0.4729),
    (0.13725, 0.2762, 0.1901, 0.4930),
    (0.16471, 0.2680, 0.2235, 0.5120),
    (0.19216, 0.2573, 0.2561, 0.5266),
    (0.22353, 0.2431, 0.2921, 0.5385),
    (0.25098, 0.2297, 0.3224, 0.5457),
    (0.28235, 0.2143, 0.3556, 0.5512),
    (0.31765, 0.1976, 0.3915, 0.5550),
    (0.35686, 0.1806, 0.4300, 0.5573),
    (0.39608, 0.1651, 0.4674, 0.5581),
    (0.43922, 0.1490, 0.5081, 0.5572),
    (0.47059, 0.1378, 0.5375, 0.5549),
    (0.50588, 0.1265, 0.5706, 0.5498),
    (0.53333, 0.1206, 0.5964, 0.5436),
    (0.56078, 0.1201, 0.6222, 0.5349),
    (0.60392, 0.1373, 0.6623, 0.5156),
    (0.63529, 0.1664, 0.6909, 0.4965),
    (0.66667, 0.2080, 0.7187, 0.4729),
    (0.70196, 0.2669, 0.7488, 0.4406),
    (0.73725, 0.3359, 0.7770, 0.4020),
    (0.77647, 0.4219, 0.8058, 0.3519),
    (0.81569, 0.5160, 0.8312, 0.2943),
    (0.85882, 0.6266, 0.8546, 0.2234),
    (0.90588, 0.7519, 0.8750, 0.1432),
    (0.93333, 0.8249, 0.8847, 0.1062),
    (0.94902, 0.8660, 0.8899, 0.0960),
    (0.96471, 0.9063, 0.8949, 0.0981),
    (0.98039, 0.9456, 0.8998, 0.1128),
    (1.00000, 0.9932, 0.9062, 0.1439),
)

_RAINBOW = (
    (0.00000, 0.5000, 0.0000, 1.0000),
    (0.03529, 0.4294, 0.1107, 0.9985),
    (0.07059, 0.3588, 0.2199, 0.9939),
    (0.10588, 0.2882, 0.3265, 0.9862),
    (0.14510, 0.2098, 0.4402, 0.9741),
    (0.17255, 0.1549, 0.5159, 0.9635),
    (0.20000, 0.1000, 0.5878, 0.9511),
    (0.22353, 0.0529, 0.6459, 0.9390),
    (0.25098, 0.0020, 0.7093, 0.9233),
    (0.28235, 0.0647, 0.7752, 0.9032),
    (0.31373, 0.1275, 0.8336, 0.8810),
    (0.34510, 0.1902, 0.8839, 0.8566),
    (0.37647, 0.2529, 0.9256, 0.8302),
    (0.40784, 0.3157, 0.9584, 0.8017),
    (0.43922, 0.3784, 0.9818, 0.7713),
    (0.47059, 0.4412, 0.9957, 0.7390),
    (0.49804, 0.4961, 1.0000, 0.7093),
    (0.52549, 0.5510, 0.9968, 0.6782),
    (0.55686, 0.6137, 0.9841, 0.6412),
    (0.58824, 0.6765, 0.9618, 0.6026),
    (0.61961, 0.7392, 0.9302, 0.5626),
    (0.65098, 0.8020, 0.8896, 0.5212),
    (0.68235, 0.8647, 0.8403, 0.4785),
    (0.71373, 0.9275, 0.7829, 0.4347),
    (0.74902, 0.9980, 0.7093, 0.3841),
    (0.77255, 1.0000, 0.6553, 0.3497),
    (0.80000, 1.0000, 0.5878, 0.3090),
    (0.82745, 1.0000, 0.5159, 0.2677),
    (0.85490, 1.0000, 0.4402, 0.2260),
    (0.88627, 1.0000, 0.3497, 0.1777),
    (0.91765, 1.0000, 0.2558, 0.1290),
    (0.95686, 1.0000, 0.1351, 0.0677),
    (1.00000, 1.0000, 0.0000, 0.0000),
)

_JET = (
    (0.00000, 0.0000, 0.0000, 0.5000),
    (0.02745, 0.0000, 0.0000, 0.6248),
    (0.05490, 0.0000, 0.0000, 0.7496),
    (0.10980, 0.0000, 0.0000, 0.9991),
    (0.12549, 0.0000, 0.0020, 1.0000),
    (0.17647, 0.0000, 0.2059, 1.0000),
    (0.23137, 0.0000, 0.4255, 1.0000),
    (0.28235, 0.0000, 0.6294, 1.0000),
    (0.33725, 0.0000, 0.8490, 1.0000),
    (0.34118, 0.0000, 0.8647, 0.9962),
    (0.34902, 0.0000, 0.8961, 0.9709),
    (0.37255, 0.0727, 0.9902, 0.8950),
    (0.37647, 0.0854, 1.0000, 0.8824),
    (0.40784, 0.1866, 1.0000, 0.7812),
    (0.43922, 0.2878, 1.0000, 0.6799),
    (0.47059, 0.3890, 1.0000, 0.5787),
    (0.50588, 0.5028, 1.0000, 0.4649),
    (0.53725, 0.6040, 1.0000, 0.3637),
    (0.57255, 0.7179, 1.0000, 0.2498),
    (0.60392, 0.8191, 1.0000, 0.1486),
    (0.63922, 0.9330, 1.0000, 0.0348),
    (0.65098, 0.9709, 0.9593, 0.0000),
    (0.65882, 0.9962, 0.9303, 0.0000),
    (0.66275, 1.0000, 0.9158, 0.0000),
    (0.71765, 1.0000, 0.7124, 0.0000),
    (0.74510, 1.0000, 0.6107, 0.0000),
    (0.77647, 1.0000, 0.4946, 0.0000),
    (0.83137, 1.0000, 0.2912, 0.0000),
    (0.85882, 1.0000, 0.1895, 0.0000),
    (0.89020, 0.9991, 0.0733, 0.0000),
    (0.90980, 0.9100, 0.0007, 0.0000),
    (0.95294, 0.7139, 0.0000, 0.0000),
    (1.00000, 0.5000, 0.0000, 0.0000),
)

_COOL_WARM = (
    (0.00000, 0.2298, 0.2987, 0.7537),
    (0.03137, 0.2664, 0.3533, 0.8016),
    (0.06275, 0.3042, 0.4069, 0.8453),
    (0.09412, 0.3433, 0.4594, 0.8841),
    (0.12549, 0.3837, 0.5102, 0.9178),
    (0.15686, 0.4252, 0.5591, 0.9461),
    (0.18824, 0.4677, 0.6056, 0.9685),
    (0.21961, 0.5108, 0.6494, 0.9851),
    (0.25098, 0.5543, 0.6901, 0.9955),
    (0.28235, 0.5978, 0.7273, 0.9998),
    (0.31373, 0.6408, 0.7608, 0.9978),
    (0.34510, 0.6831, 0.7900, 0.9898),
    (0.37647, 0.7240, 0.8149, 0.9757),
    (0.40784, 0.7634, 0.8351, 0.9557),
    (0.43922, 0.8006, 0.8504, 0.9300),
    (0.47059, 0.8353, 0.8605, 0.8990),
    (0.50196, 0.8674, 0.8644, 0.8626),
    (0.52941, 0.8959, 0.8499, 0.8235),
    (0.56078, 0.9227, 0.8286, 0.7771),
    (0.59216, 0.9434, 0.8023, 0.7292),
    (0.62353, 0.9582, 0.7712, 0.6803),
    (0.65490, 0.9670, 0.7357, 0.6309),
    (0.68627, 0.9699, 0.6958, 0.5813),
    (0.71765, 0.9669, 0.6520, 0.5320),
    (0.74902, 0.9583, 0.6043, 0.4833),
    (0.78431, 0.9417, 0.5464, 0.4297),
    (0.81176, 0.9244, 0.4986, 0.3891),
    (0.84314, 0.8995, 0.4407, 0.3441),
    (0.87451, 0.8697, 0.3793, 0.3009),
    (0.90588, 0.8350, 0.3136, 0.2598),
    (0.93725, 0.7959, 0.2418, 0.2208),
    (0.96863, 0.7527, 0.1576, 0.1843),
    (1.00000, 0.7057, 0.0156, 0.1502),
)

_RAINBOW_REVERSED = (
    (0.00000, 1.0000, 0.0000, 0.0000),
    (0.04314, 1.0000, 0.1351, 0.0677),
    (0.08235, 1.0000, 0.2558, 0.1290),
    (0.11373, 1.0000, 0.3497, 0.1777),
    (0.14510, 1.0000, 0.4402, 0.2260),
    (0.17255, 1.0000, 0.5159, 0.2677),
    (0.20000, 1.0000, 0.5878, 0.3090),
    (0.22745, 1.0000, 0.6553, 0.3497),
    (0.25098, 0.9980, 0.7093, 0.3841),
    (0.28627, 0.9275, 0.7829, 0.4347),
    (0.31765, 0.8647, 0.8403, 0.4785),
    (0.34902, 0.8020, 0.8896, 0.5212),
    (0.38039, 0.7392, 0.9302, 0.5626),
    (0.41176, 0.6765, 0.9618, 0.6026),
    (0.44314, 0.6137, 0.9841, 0.6412),
    (0.47451, 0.5510, 0.9968, 0.6782),
    (0.50196, 0.4961, 1.0000, 0.7093),
    (0.52941, 0.4412, 0.9957, 0.7390),
    (0.56078, 0.3784, 0.9818, 0.7713),
    (0.59216, 0.3157, 0.9584, 0.8017),
    (0.62353, 0.2529, 0.9256, 0.8302),
    (0.65490, 0.1902, 0.8839, 0.8566),
    (0.68627, 0.1275, 0.8336, 0.8810),
    (0.71765, 0.0647, 0.7752, 0.9032),
    (0.74902, 0.0020, 0.7093, 0.9233),
    (0.77647, 0.0529, 0.6459, 0.9390),
    (0.80000, 0.1000, 0.5878, 0.9511),
    (0.82745, 0.1549, 0.5159, 0.9635),
    (0.85490, 0.2098, 0.4402, 0.9741),
    (0.89412, 0.2882, 0.3265, 0.9862),
    (0.92941, 0.3588, 0.2199, 0.9939),
    (0.96471, 0.4294, 0.1107, 0.9985),
    (1.00000, 0.5000, 0.0000, 1.0000),
)

_PALE_RAINBOW = (
    (0.00000, 0.7500, 0.5000, 1.0000),
    (0.03529, 0.7147, 0.5554, 0.9992),
    (0.07059, 0.6794, 0.6099, 0.9970),
    (0.10588, 0.6441, 0.6633, 0.9931),
    (0.14510, 0.6049, 0.7201, 0.9870),
    (0.17255, 0.5775, 0.7580, 0.9818),
    (0.20000, 0.5500, 0.7939, 0.9755),
    (0.22353, 0.5264, 0.8230, 0.9695),
    (0.25098, 0.5010, 0.8547, 0.9617),
    (0.28235, 0.5323, 0.8876, 0.9516),
    (0.31373, 0.5637, 0.9168, 0.9405),
    (0.34510, 0.5951, 0.9420, 0.9283),
    (0.37647, 0.6264, 0.9628, 0.9151),
    (0.40784, 0.6579, 0.9792, 0.9008),
    (0.43922, 0.6892, 0.9909, 0.8857),
    (0.47059, 0.7206, 0.9979, 0.8695),
    (0.49804, 0.7480, 1.0000, 0.8547),
    (0.52549, 0.7755, 0.9984, 0.8391),
    (0.55686, 0.8069, 0.9920, 0.8206),
    (0.58824, 0.8382, 0.9809, 0.8013),
    (0.61961, 0.8696, 0.9651, 0.7813),
    (0.65098, 0.9010, 0.9448, 0.7606),
    (0.68235, 0.9324, 0.9202, 0.7392),
    (0.71373, 0.9637, 0.8915, 0.7173),
    (0.74902, 0.9990, 0.8547, 0.6921),
    (0.77255, 1.0000, 0.8276, 0.6748),
    (0.80000, 1.0000, 0.7939, 0.6545),
    (0.82745, 1.0000, 0.7580, 0.6339),
    (0.85490, 1.0000, 0.7201, 0.6130),
    (0.88627, 1.0000, 0.6748, 0.5888),
    (0.91765, 1.0000, 0.6279, 0.5645),
    (0.95686, 1.0000, 0.5675, 0.5339),
    (1.00000, 1.0000, 0.5000, 0.5000),
)

_WARM_TO_COOL = (
    (0.00000, 0.7057, 0.0156, 0.1502),
    (0.03137, 0.7527, 0.1576, 0.1843),
    (0.06275, 0.7959, 0.2418, 0.2208),
    (0.09412, 0.8350, 0.3136, 0.2598),
    (0.12549, 0.8697, 0.3793, 0.3009),
    (0.15686, 0.8995, 0.4407, 0.3441),
    (0.18824, 0.9244, 0.4986, 0.3891),
    (0.21569, 0.9417, 0.5464, 0.4297),
    (0.25098, 0.9583, 0.6043, 0.4833),
    (0.28235, 0.9669, 0.6520, 0.5320),
    (0.31373, 0.9699, 0.6958, 0.5813),
    (0.34510, 0.9670, 0.7357, 0.6309),
    (0.37647, 0.9582, 0.7712, 0.6803),
    (0.40784, 0.9434, 0.8023, 0.7292),
    (0.43922, 0.9227, 0.8286, 0.7771),
    (0.47059, 0.8959, 0.8499, 0.8235),
    (0.49804, 0.8674, 0.8644, 0.8626),
    (0.52941, 0.8353, 0.8605, 0.8990),
    (0.56078, 0.8006, 0.8504, 0.9300),
    (0.59216, 0.7634, 0.8351, 0.9557),
    (0.62353, 0.7240, 0.8149, 0.9757),
    (0.65490, 0.6831, 0.7900, 0.9898),
    (0.68627, 0.6408, 0.7608, 0.9978),
    (0.71765, 0.5978, 0.7273, 0.9998),
    (0.74902, 0.5543, 0.6901, 0.9955),
    (0.78039, 0.5108, 0.6494, 0.9851),
    (0.81176, 0.4677, 0.6056, 0.9685),
    (0.84314, 0.4252, 0.5591, 0.9461),
    (0.87451, 0.3837, 0.5102, 0.9178),
    (0.90588, 0.3433, 0.4594, 0.8841),
    (0.93725, 0.3042, 0.4069, 0.8453),
    (0.96863, 0.2664, 0.3533, 0.8016),
    (1.00000, 0.2298, 0.2987, 0.7537),
)

# red -> blue -> yellow, evenly sampled from a 3-anchor gradient
_RBY_ANCHORS = ((0.0, (0.7020, 0.0157, 0.1490)), (0.5, (0.1294, 0.4000, 0.6745)), (1.0, (1.0000, 0.8510, 0.1843)))


def _sample_anchors(anchors, n=33):
    pts = []
    for k in range(n):
        t = k / (n - 1)
        rgb = anchors[-1][1]
        for (t0, c0), (t1, c1) in zip(anchors, anchors[1:]):
            if t0 <= t <= t1:
                u = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
                rgb = tuple(round(a + (b - a) * u, 4) for a, b in zip(c0, c1))
                break
        pts.append((round(t, 5),) + rgb)
    return tuple(pts)


_RED_BLUE_YELLOW = _sample_anchors(_RBY_ANCHORS)
_GRAYSCALE = tuple((round(k / 32, 5),) * 4 for k in range(33))

_TABLES = {
    "viridis": _VIRIDIS,
    "rainbow": _RAINBOW,
    "rainbow reversed": _RAINBOW_REVERSED,
    "cool to warm": _COOL_WARM,
    "warm to cool": _WARM_TO_COOL,
    "red blue yellow": _RED_BLUE_YELLOW,
    "pale rainbow": _PALE_RAINBOW,
    "jet": _JET,
    "grayscale": _GRAYSCALE,
}

UNSEEN_TEST_COLORMAPS = ("rainbow", "rainbow reversed", "cool to warm", "warm to cool", "red blue yellow")


def named_colormap(name: str) -> ColorMap:
    """Look up an embedded colormap by name; raises ValueError if unknown."""
    key = name.strip().lower().replace("-", " ").replace("_", " ")
    if key not in _TABLES:
        raise ValueError(f"unknown colormap {name!r}; available: {sorted(_TABLES)}")
    return ColorMap(points=_TABLES[key], name=key)


def colormap_names() -> list[str]:
    return sorted(_TABLES)
