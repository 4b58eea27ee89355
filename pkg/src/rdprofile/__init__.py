"""Rate-distortion profiling of sensor time series.

Estimates how compressible sensor signals are, classifies them into
rate-distortion classes from time series features and models the energy a
low-power network saves by compressing each class appropriately.
"""

__version__ = '0.1.0'
