# Robust portfolio choice under ambiguity about the exploit intensity
