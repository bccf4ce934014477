"""Joint beamforming and power-splitting design for cooperative SWIPT-NOMA."""
