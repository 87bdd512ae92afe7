"""Physical constants shared across the package (km, s)."""

GM_MOON = 4902.800066  # km^3/s^2
MOON_RADIUS = 1737.4  # km, mean radius
SPEED_OF_LIGHT = 299792.458  # km/s

PPM = 1.0e6
