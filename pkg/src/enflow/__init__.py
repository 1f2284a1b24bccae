"""Energy-guided conditional flow matching for molecular conformer ensembles"""
