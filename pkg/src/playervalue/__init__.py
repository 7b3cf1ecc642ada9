"""Player market-value regression with boosted trees and exact tree SHAP."""

__version__ = "0.1.0"
