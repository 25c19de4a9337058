# desk-scale channel study
