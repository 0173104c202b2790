# Pose filtering, simulation, reconstruction runs, evaluation and reporting
