# Global-game run thresholds under congestion and ambiguity
