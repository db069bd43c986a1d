# Parsers and cleaning rules for external market, event and holdings files
