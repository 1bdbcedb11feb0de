"""Recovery after isolated failures: the per-second inconsistency probe.

One node dies at t=10 and another at t=30 (scripted, not random).  Right
after each death, every subscriber of the victim still believes it is
alive; the count decays to zero as the subscribers' next update cycles
poll it.  Prints the probe series as a small ASCII chart.
"""

from hbsim import ExperimentConfig, FailureConfig, ProtocolConfig, ScriptedFailureStream, run_one


def main():
    cfg = ExperimentConfig(
        nodes=100,                      # subscriptions default to sqrt(n) = 10
        duration_s=45.0,
        runs=1,
        seed=2024,
        protocol=ProtocolConfig(kind="simple_p2p"),
        failure=FailureConfig(rate_pct_per_min=0.0))
    script = ScriptedFailureStream(delays=[10.0, 20.0], picks=[17, 55])
    out = run_one(cfg, 0, failure_stream=script)

    print("scripted failures:")
    for t, node, effect, count in out.failures:
        print(f"  t={t:5.1f}  node {node} {effect}; {count} nodes inconsistent at that instant")

    print("\nper-second probe (inconsistent nodes over time):")
    for t, count in out.probes:
        bar = "#" * count
        print(f"  t={t:5.1f}  {count:3d} {bar}")

    peak = max(count for _, count in out.probes)
    settle = max((t for t, count in out.probes if count > 0), default=None)
    print(f"\npeak {peak} inconsistent nodes; last nonzero probe at t={settle}")
    print("every subscriber re-polls within one update cycle (< 1.2 s),")
    print("so each spike drains within two probe ticks")


if __name__ == "__main__":
    main()
