# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

__version__ = "0.1.0"
