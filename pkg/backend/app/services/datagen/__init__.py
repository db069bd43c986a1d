# Synthetic event catalogs, market panels and estimation-ready panel assembly
