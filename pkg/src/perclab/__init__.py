"""  A laboratory for bond percolation on d-regular graphs.

Script usage: perclab [-h] {gen,percolate,prune,match,experiment,bounds} ...

subcommands:
    gen          build a host graph and write it in the graph text format
    percolate    draw a seeded percolated sample G_p of a host graph
    prune        run the degree-pruning process on a sample and export its trace
    match        build a matching in a sample (theorem1, karp_sipser or exact)
    experiment   run a batch of seeded trials described by a TOML config
    bounds       evaluate one of the analytic bounds with explicit parameters

"""

__author__ = 'Daniel Ephraty'
__version__ = '0.2.1'
