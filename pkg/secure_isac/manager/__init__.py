from secure_isac.manager.manager import BCDManager, RunResult
