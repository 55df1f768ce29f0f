"""Code-frequency block-group (CFBG) pilot authentication toolkit.

Library and CLI simulator for anti-spoofing pilot authentication in a
two-user uplink SIMO-OFDM system.  Pilot phases are conveyed as subcarrier
block-activation codewords drawn from a superimposed code; a four-hypothesis
eigenvalue-ratio detector counts signals per block; block-detection based
codeword decoding (BDCD) separates and classifies the observed patterns
under silence / imitation / wideband-jamming attacks; a semi-blind MMSE
estimator recovers the channels and a spatial-correlation ML test
disambiguates imitated pilots.

Subpackages and modules
-----------------------
combinatorics   MDS codes, Latin hypercubes, ZFD/BD verification, codebook
wishart         exact ordered-eigenvalue moments of complex Wishart matrices
detection       eigenvalue-ratio detectors and threshold calibration
channel         spatially correlated frequency-selective channel simulator
authproto       pilot quantization, encoding, BDCD decoding, SEP accounting
estimation      MMSE semi-blind FS/CIR estimation and ML identification
harness         experiment configs, deterministic RNG streams, CLI
"""

__version__ = "0.1.0"
