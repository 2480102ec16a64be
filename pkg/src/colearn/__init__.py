"""Relatedness and neighbour-density analysis of regional industry panels.

The subpackages follow the data flow: :mod:`panel` ingests firm records,
:mod:`complexity` and :mod:`geo` compute the industry- and province-side
measures, :mod:`space` builds the industry network, :mod:`events` finds
diversification events, :mod:`regression` fits the models, :mod:`synth`
generates test scenarios and :mod:`pipeline` wires the command line.
"""

__version__ = "0.1.0"
