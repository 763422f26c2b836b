"""Model families: baselines, factorization models and regression models."""
