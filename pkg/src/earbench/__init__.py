"""earbench: remote speech-intelligibility testing toolbox.

Covers the full experiment pipeline: vocoded (CI-simulated) stimulus
generation in anechoic and reverberant rooms, room-acoustics metrics,
a session service for remote listeners, phoneme-level scoring, and
repeated-measures statistics.
"""

__version__ = "0.1.0"
