"""实验命令：run / ablate / throughput / heatmap。"""
