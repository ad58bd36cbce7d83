"""
Link budget for a 1 km hop
==========================

How loud does a 2 W projector sound at the sink, and which transmission
mode does the resulting SNR buy?
"""

from uwcsma.acoustics import received_snr, source_level, spreading_loss, thorp_absorption
from uwcsma.phy import select_mode

# Electrical power in, source level out (dB re 1 uPa at 1 m).
sl = source_level(2.0)
print(f"source level        {sl:7.2f} dB")

# Spherical spreading dominates at short range; absorption grows with frequency.
for f in (1.0, 9.0, 20.0):
    print(f"absorption @ {f:4.1f} kHz {thorp_absorption(f):7.4f} dB/km")

for r in (250.0, 1000.0, 4000.0):
    tl = spreading_loss(r) + thorp_absorption(9.0) * r / 1000.0
    for nl in (80.0, 100.0):
        snr = received_snr(sl, tl, nl)
        print(f"r={r:6.0f} m  NL={nl:5.1f} dB  TL={tl:6.2f} dB  SNR={snr:6.2f} dB  mode {select_mode(snr)}")
