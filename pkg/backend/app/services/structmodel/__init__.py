# Structural transmission model: exploit shock, congestion, redemptions and spread response
