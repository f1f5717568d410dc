"""What does way partitioning cost the protected workload?

Sweep the number of ways granted to one enclave on a 16-way cache and run
the same working-set workload each time. With one way the working set
thrashes; once the allocation covers it, overhead drops to zero against the
whole-cache baseline.
"""

from enclavesim.stats import render_plot_data, way_sweep

rows = way_sweep(way_counts=(1, 2, 4, 8, 16), rounds=8)

print(f"{'ways':>5} {'cycles':>9} {'misses':>8} {'overhead':>9}")
for row in rows:
    print(f"{row['ways']:>5} {row['cycles']:>9} {row['misses']:>8} "
          f"{row['overhead']:>8.1%}")

print("\nplot-ready TSV:\n")
print(render_plot_data(rows))
