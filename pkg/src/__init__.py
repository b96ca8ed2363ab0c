# sle-montecarlo package
