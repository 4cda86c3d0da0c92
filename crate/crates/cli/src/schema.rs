pub const SWEEP_ROW_COLUMNS: [&str; 9] = [
    "lambda",
    "seed",
    "policy",
    "mean_backlog",
    "delivered_rate",
    "slope",
    "stable",
    "halted",
    "error",
];

pub const SWEEP_POINT_COLUMNS: [&str; 8] = [
    "lambda",
    "policy",
    "runs",
    "failed",
    "mean_backlog",
    "delivered_rate",
    "slope",
    "stable_fraction",
];

pub const SCHEMA: &str = "\
run trace CSV (`run --out`), one row per recorded slot:
  slot            slots completed so far
  total_backlog   q_backlog + x_backlog + y_backlog
  q_backlog       packets in all data queues (raw and processed, dummies included)
  x_backlog       raw packets waiting at computation nodes
  y_backlog       results waiting to be pushed (regulated policies only)
  h_backlog       sum of the virtual load counters
  delivered_cum   useful results delivered to the destination
  dummy_cum       dummy results dropped at the destination
  atilde_<n>      queries assigned to computation node n, cumulative
  z_<n>           pairs combined at computation node n, cumulative

run summary (JSON on stdout, or stderr when the trace goes to stdout):
  lambda, policy, seed, horizon, slots_run, halted, mean_backlog,
  mean_virtual_backlog, delivered_rate, slope, stable, digest,
  computation_nodes, assigned_rate, combined_rate, delivered_total,
  dummies_total, threshold_shortfalls, warmup
  Averages and the slope cover the second half of the horizon.
  stable = not halted and slope <= 0.001 packets/slot.

sweep rows CSV (`sweep --out`), one row per (lambda, seed):
  lambda, seed, policy, mean_backlog, delivered_rate, slope, stable, halted, error

sweep points CSV (`sweep --points`), one row per lambda, averaged over seeds:
  lambda, policy, runs, failed, mean_backlog, delivered_rate, slope, stable_fraction

plotdata CSV:
  x, y, series    x = lambda, y = the chosen column, series = input label

exit codes:
  0 success, 1 parse or I/O error, 2 constraint violation, 3 overflow halt,
  4 LP pivot limit, 5 coupled scenarios differ, 6 dominance violated
";
