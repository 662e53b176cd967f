"""Machine-learning extreme event attribution with validity audits."""
