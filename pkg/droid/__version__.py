"""
DROID sim2sim testbed

Project version and meta informations.
"""

__version__ = "1.0.0"
__title__ = "droid"
__description__ = "DROID - Domain randomization optimization by torque trajectory identification, sim2sim testbed"
__author__ = "DROID testbed contributors"
__author_email__ = ""
__license__ = "Apache License 2.0"
__keywords__ = "sim2sim domain randomization system identification cma-es ppo reinforcement learning door opening torque trajectory"
