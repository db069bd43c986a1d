# Estimators: linear models, event studies, threshold, GIV/2SLS, local projections, placebo
