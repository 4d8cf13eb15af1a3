# Initialize db package 