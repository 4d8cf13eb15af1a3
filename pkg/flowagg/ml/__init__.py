# Learning components: degradation SVM and flow-statistics IDS
