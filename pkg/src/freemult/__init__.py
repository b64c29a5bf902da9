"""freemult: free multiplicative convolution laboratory.

Exact non-crossing partition combinatorics, S-transform calculus for free
convolutions, product-of-factors moment models, the log-normal-like limit
law of large free products, distance/rate machinery, random-matrix
cross-checks, and the regularization toolkit that connects smooth test
functions to Fourier-side bounds.
"""

__version__ = "0.1.0"
