"""
Evaluation harness for the wpp-selfheal project.

- TC1-TC9 scenario presets and simulator construction
- Single-run orchestration and metrics
- Resilience curve metrics (performance drop, recovery time)
- Multi-seed evaluation, confidence intervals and comparison summary
"""
