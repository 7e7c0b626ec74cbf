from secure_isac.optim.conic import ConicProblem, solve
